use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convolve::lipschitz_estimate;
use crate::error::{Error, Result};
use crate::field::{neumaier_sum, total_variation, Field, Grid, VectorField};
use crate::physics::Mobility;

use super::sgn;

/// Data for the two divergence lemmas. `psi` and `phi` are stored in
/// displacement order: index `i` along an axis stands for the offset
/// `wrapped(i)·h`, so `phi` is centered on index 0.
#[derive(Clone, Debug)]
pub struct LemmaInstance {
    pub v: VectorField,
    pub a: Field,
    pub b: Field,
    pub psi: Field,
    pub phi: Field,
    pub mobility: Mobility,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `rhs + slack - lhs`; nonnegative exactly when the check passes.
    pub margin: f64,
    pub pass: bool,
}

impl LemmaCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        let slack = 0.05 * (lhs.abs() + rhs) + 1e-8;
        let margin = rhs + slack - lhs;
        Self { lhs, rhs, slack, margin, pass: margin >= 0.0 }
    }
}

impl LemmaInstance {
    pub fn new(v: VectorField, a: Field, b: Field, psi: Field, phi: Field, mobility: Mobility) -> Result<Self> {
        let g = *a.grid();
        for other in [v.grid(), b.grid(), psi.grid(), phi.grid()] {
            g.ensure_same(other)?;
        }
        for f in [&a, &b, &psi, &phi] {
            f.ensure_finite()?;
        }
        if v.components().iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidField("non-finite velocity".into()));
        }
        if psi.min() < 0.0 {
            return Err(Error::InvalidField("psi must be nonnegative".into()));
        }
        Ok(Self { v, a, b, psi, phi, mobility })
    }

    pub fn grid(&self) -> &Grid {
        self.a.grid()
    }

    pub fn with_phi(&self, phi: Field) -> Result<Self> {
        Self::new(self.v.clone(), self.a.clone(), self.b.clone(), self.psi.clone(), phi, self.mobility.clone())
    }

    fn ensure_no_wrap(&self) -> Result<()> {
        let g = self.grid();
        let edge = (g.cells_per_axis() / 2) as isize - 1;
        for (i, &x) in self.phi.values().iter().enumerate() {
            let m = g.unravel(i);
            let touches = (0..g.dim()).any(|a| g.wrapped(m[a]).abs() >= edge);
            if touches && x != 0.0 {
                return Err(Error::WrapContamination(format!("phi is nonzero at displacement cell {i}")));
            }
        }
        Ok(())
    }

    fn sup_fprime(&self) -> f64 {
        let bmax = self.b.values().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        self.mobility.bounds(2.0 * bmax).sup_fprime
    }

    /// `h^{2d} Σ_{x,y} div_y[ψ(x+y) φ(x-y) W(x,y)] sgn(a(x)-b(y)) (f(a(x)) - f(b(y)))`
    /// with `W = V(x)` or `W = V(x) - V(y)` and central differences in `y`.
    fn lhs(&self, relative: bool) -> f64 {
        let g = *self.grid();
        let n = g.cells_per_axis();
        let inv_2h = 0.5 / g.spacing();
        let (a, b) = (self.a.values(), self.b.values());
        let fa: Vec<f64> = a.iter().map(|&x| self.mobility.value(x)).collect();
        let fb: Vec<f64> = b.iter().map(|&x| self.mobility.value(x)).collect();
        let (psi, phi) = (self.psi.values(), self.phi.values());
        let idx = |m: [usize; 2], o: [usize; 2], sign: bool| {
            let c = |k: usize| if sign { (m[k] + o[k]) % n } else { (m[k] + n - o[k]) % n };
            g.ravel([c(0), c(1)])
        };
        let rows = (0..g.len()).map(|x| {
            let mx = g.unravel(x);
            let mut row = 0.0;
            for y in 0..g.len() {
                let weight = sgn(a[x] - b[y]) * (fa[x] - fb[y]);
                if weight == 0.0 {
                    continue;
                }
                let mut div = 0.0;
                for axis in 0..g.dim() {
                    let va = self.v.component(axis);
                    let yp = g.neighbor(y, axis, 1);
                    let ym = g.neighbor(y, axis, -1);
                    let (myp, mym) = (g.unravel(yp), g.unravel(ym));
                    let gp = psi[idx(mx, myp, true)] * phi[idx(mx, myp, false)];
                    let gm = psi[idx(mx, mym, true)] * phi[idx(mx, mym, false)];
                    let (wp, wm) = if relative { (va[x] - va[yp], va[x] - va[ym]) } else { (va[x], va[x]) };
                    div += (gp * wp - gm * wm) * inv_2h;
                }
                row += div * weight;
            }
            row
        });
        let vol = g.cell_volume();
        vol * vol * neumaier_sum(rows)
    }
}

/// `h^d Σ |z| |φ(z)|` with `φ` in displacement order.
pub fn first_moment(phi: &Field) -> f64 {
    let g = phi.grid();
    let h = g.spacing();
    let terms = phi.values().iter().enumerate().map(|(i, x)| {
        let m = g.unravel(i);
        let r2: f64 = (0..g.dim()).map(|a| (g.wrapped(m[a]) as f64 * h).powi(2)).sum();
        r2.sqrt() * x.abs()
    });
    g.cell_volume() * neumaier_sum(terms)
}

fn sup_abs(f: &Field) -> f64 {
    f.values().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Lemma with kernel factor `V(x)`.
pub fn check_lemma_a(inst: &LemmaInstance) -> Result<LemmaCheck> {
    inst.ensure_no_wrap()?;
    let phi_l1 = inst.grid().cell_volume() * neumaier_sum(inst.phi.values().iter().map(|x| x.abs()));
    let rhs = sup_abs(&inst.psi) * phi_l1 * total_variation(&inst.b)? * inst.v.linf() * inst.sup_fprime();
    Ok(LemmaCheck::new(inst.lhs(false), rhs))
}

/// Lemma with kernel factor `V(x) - V(y)`.
pub fn check_lemma_b(inst: &LemmaInstance) -> Result<LemmaCheck> {
    inst.ensure_no_wrap()?;
    let lip = lipschitz_estimate(&inst.v);
    if !lip.is_finite() {
        return Err(Error::InvalidField("velocity has no finite Lipschitz estimate".into()));
    }
    let rhs = sup_abs(&inst.psi) * inst.sup_fprime() * total_variation(&inst.b)? * lip * first_moment(&inst.phi);
    Ok(LemmaCheck::new(inst.lhs(true), rhs))
}

fn quartic(x: f64) -> f64 {
    if x.abs() < 1.0 {
        let s = 1.0 - x * x;
        15.0 / 16.0 * s * s
    } else {
        0.0
    }
}

/// Randomized instance for trial `trial` of the suite seeded by `seed`:
/// piecewise-constant `a`, `b`; smooth `V`, `ψ > 0`, `φ`; logistic mobility.
pub fn random_lemma_instance(grid: &Grid, seed: u64, trial: u64) -> Result<LemmaInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let g = *grid;
    let len = g.length();
    let half = 0.5 * len;

    let piecewise = |rng: &mut ChaCha8Rng| -> Result<Field> {
        let pieces = rng.random_range(1..=6usize);
        let mut cuts: Vec<f64> = (0..pieces).map(|_| rng.random_range(-half..half)).collect();
        cuts.sort_by(f64::total_cmp);
        let levels: Vec<f64> = (0..=pieces).map(|_| rng.random_range(-0.5..1.5)).collect();
        let cross: Vec<(f64, f64)> = (0..g.dim().saturating_sub(1))
            .map(|_| (rng.random_range(-half..half), rng.random_range(-0.5..0.5)))
            .collect();
        let vals = (0..g.len())
            .map(|i| {
                let x = g.position(i);
                let k = cuts.iter().filter(|c| x[0] >= **c).count();
                let extra: f64 = cross.iter().map(|(c, jump)| if x[1] >= *c { *jump } else { 0.0 }).sum();
                levels[k] + extra
            })
            .collect();
        Field::new(g, vals)
    };
    let a = piecewise(&mut rng)?;
    let b = piecewise(&mut rng)?;

    let smooth = |rng: &mut ChaCha8Rng, scale: f64| -> Vec<f64> {
        let modes: Vec<(f64, f64, usize, f64)> = (0..3)
            .map(|_| {
                (
                    rng.random_range(-scale..scale),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0..g.dim()),
                    rng.random_range(1..=3usize) as f64,
                )
            })
            .collect();
        (0..g.len())
            .map(|i| {
                let x = g.position(i);
                modes.iter().map(|(c, th, ax, k)| c * (2.0 * PI * k * x[*ax] / len + th).sin()).sum()
            })
            .collect()
    };
    let v = VectorField::new(g, (0..g.dim()).map(|_| smooth(&mut rng, 1.0)).collect())?;
    let psi_osc = smooth(&mut rng, 1.0 / 6.0);
    let psi = Field::new(g, psi_osc.iter().map(|x| 1.0 + x).collect())?;

    let h = g.spacing();
    let radius = rng.random_range(3.0 * h..0.25 * len);
    let center: Vec<f64> = (0..g.dim()).map(|_| rng.random_range(-0.1 * len..0.1 * len)).collect();
    let amp = rng.random_range(0.5..2.0);
    let tilt = smooth(&mut rng, 0.5);
    let phi = (0..g.len())
        .map(|i| {
            let m = g.unravel(i);
            let bump: f64 = (0..g.dim()).map(|ax| quartic((g.wrapped(m[ax]) as f64 * h - center[ax]) / radius)).product();
            amp * bump * (1.0 + tilt[i]) / radius.powi(g.dim() as i32)
        })
        .collect();
    LemmaInstance::new(v, a, b, psi, Field::new(g, phi)?, Mobility::logistic())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::line(64, 1.0).unwrap()
    }

    #[test]
    fn constant_mobility_gives_zero() {
        let inst = random_lemma_instance(&grid(), 1, 0).unwrap();
        let flat = LemmaInstance { mobility: Mobility::polynomial(vec![0.7]).unwrap(), ..inst };
        let r = check_lemma_a(&flat).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn zero_velocity_gives_zero_lhs() {
        let inst = random_lemma_instance(&grid(), 2, 0).unwrap();
        let still = LemmaInstance { v: VectorField::zeros(*inst.grid()), ..inst };
        assert_eq!(check_lemma_a(&still).unwrap().lhs, 0.0);
        let r = check_lemma_b(&still).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn constant_velocity_cancels_in_b() {
        let inst = random_lemma_instance(&grid(), 3, 0).unwrap();
        let c = LemmaInstance { v: VectorField::constant(*inst.grid(), &[0.8]).unwrap(), ..inst };
        let r = check_lemma_b(&c).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn wrap_is_rejected() {
        let inst = random_lemma_instance(&grid(), 4, 0).unwrap();
        let wide = inst.with_phi(Field::constant(*inst.grid(), 1.0)).unwrap();
        assert!(matches!(check_lemma_a(&wide), Err(Error::WrapContamination(_))));
        assert!(matches!(check_lemma_b(&wide), Err(Error::WrapContamination(_))));
    }

    #[test]
    fn first_moment_of_symmetric_pair() {
        let g = grid();
        let mut v = vec![0.0; 64];
        v[2] = 1.0;
        v[62] = 1.0;
        let phi = Field::new(g, v).unwrap();
        let h = g.spacing();
        assert!((first_moment(&phi) - h * 4.0 * h).abs() < 1e-15);
    }

    #[test]
    fn random_suite_two_dimensions() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        for t in 0..5 {
            let inst = random_lemma_instance(&g, 9, t).unwrap();
            assert!(check_lemma_a(&inst).unwrap().pass);
        }
    }
}
