//! Mobility functions `f` in the flux `f(u) K*u`.

use crate::error::{Error, Result};

/// Closed-form family of the mobility.
#[derive(Clone, Debug, PartialEq)]
pub enum MobilityKind {
    /// `Σ c_j ξ^j`, coefficients in increasing degree.
    Polynomial(Vec<f64>),
    /// `ξ^m`, defined for `ξ >= 0` only.
    Power { m: f64 },
    /// `ξ (1 - ξ)`.
    Logistic,
    /// `ξ (1 - ξ)^α` with `α >= 1`. Non-integer `α` requires `ξ <= 1`.
    LogisticPower { alpha: f64 },
}

/// A mobility together with its growth law `|f(ξ)| <= C (1 + |ξ|^α)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mobility {
    kind: MobilityKind,
    growth_exponent: f64,
    growth_constant: f64,
}

/// Suprema of `|f|` and `|f'|` over an interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobilityBounds {
    pub sup_f: f64,
    pub sup_fprime: f64,
}

fn is_integer(x: f64) -> bool {
    x.fract() == 0.0 && x.abs() < 1e9
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(j, &a)| j as f64 * a).collect()
}

/// Interior points of `(lo, hi)` where the polynomial `c` changes sign.
fn poly_sign_changes(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    const SAMPLES: usize = 4096;
    let mut roots = Vec::new();
    if c.iter().all(|&a| a == 0.0) || hi <= lo {
        return roots;
    }
    let step = (hi - lo) / SAMPLES as f64;
    let mut x0 = lo;
    let mut f0 = poly_eval(c, x0);
    for i in 1..=SAMPLES {
        let x1 = if i == SAMPLES { hi } else { lo + step * i as f64 };
        let f1 = poly_eval(c, x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let fm = poly_eval(c, m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// `u (1 - u)^α` expanded as a polynomial for integer `α`.
fn logistic_power_coefficients(alpha: u32) -> Vec<f64> {
    let mut c = vec![0.0; alpha as usize + 2];
    let mut binom = 1.0;
    for j in 0..=alpha {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        c[j as usize + 1] = sign * binom;
        binom = binom * (alpha - j) as f64 / (j + 1) as f64;
    }
    c
}

impl Mobility {
    /// Builds a mobility with its default growth law and validates it.
    pub fn new(kind: MobilityKind) -> Result<Self> {
        let (alpha, c) = match &kind {
            MobilityKind::Polynomial(coef) => {
                let degree = coef.iter().rposition(|&a| a != 0.0).unwrap_or(0);
                let c: f64 = coef.iter().map(|a| a.abs()).sum();
                ((degree as f64).max(1.0), c.max(1e-300))
            }
            MobilityKind::Power { m } => (*m, 1.0),
            MobilityKind::Logistic => (2.0, 2.0),
            MobilityKind::LogisticPower { alpha } => (alpha + 1.0, 2f64.powf(*alpha)),
        };
        Self::with_growth(kind, alpha, c)
    }

    /// Builds a mobility with an explicit growth law, rejecting it if the law
    /// fails on sampled points of `[-10, 10]` (`[0, 10]` for power kinds).
    pub fn with_growth(kind: MobilityKind, growth_exponent: f64, growth_constant: f64) -> Result<Self> {
        match &kind {
            MobilityKind::Polynomial(c) if c.iter().any(|a| !a.is_finite()) => {
                return Err(Error::Config("polynomial coefficients must be finite".into()))
            }
            MobilityKind::Power { m } if !(m.is_finite() && *m > 0.0) => {
                return Err(Error::Config(format!("power exponent must be positive, got {m}")))
            }
            MobilityKind::LogisticPower { alpha } if !(alpha.is_finite() && *alpha >= 1.0) => {
                return Err(Error::Config(format!("logistic-power exponent must be >= 1, got {alpha}")))
            }
            _ => {}
        }
        if !(growth_exponent > 0.0 && growth_constant > 0.0) {
            return Err(Error::Config("growth exponent and constant must be positive".into()));
        }
        let mob = Self { kind, growth_exponent, growth_constant };
        let (lo, hi) = mob.natural_domain(-10.0, 10.0);
        for i in 0..=2000 {
            let xi = lo + (hi - lo) * i as f64 / 2000.0;
            let f = mob.value(xi);
            let d = mob.derivative(xi);
            // u^m with m < 1 has an infinite slope at the origin only
            if !f.is_finite() || (!d.is_finite() && xi != 0.0) {
                return Err(Error::Config(format!("mobility not finite at {xi}")));
            }
            let bound = growth_constant * (1.0 + xi.abs().powf(growth_exponent));
            if f.abs() > bound * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "growth law |f| <= {growth_constant}(1+|ξ|^{growth_exponent}) fails at ξ = {xi}"
                )));
            }
        }
        Ok(mob)
    }

    pub fn zero() -> Self {
        Self::new(MobilityKind::Polynomial(vec![0.0])).expect("zero mobility is valid")
    }

    /// `f(u) = u`.
    pub fn linear() -> Self {
        Self::new(MobilityKind::Polynomial(vec![0.0, 1.0])).expect("linear mobility is valid")
    }

    pub fn logistic() -> Self {
        Self::new(MobilityKind::Logistic).expect("logistic mobility is valid")
    }

    pub fn power(m: f64) -> Result<Self> {
        Self::new(MobilityKind::Power { m })
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(MobilityKind::Polynomial(coefficients))
    }

    pub fn logistic_power(alpha: f64) -> Result<Self> {
        Self::new(MobilityKind::LogisticPower { alpha })
    }

    pub fn kind(&self) -> &MobilityKind {
        &self.kind
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth_exponent
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    /// True when `f ≡ 0`.
    pub fn is_zero(&self) -> bool {
        matches!(&self.kind, MobilityKind::Polynomial(c) if c.iter().all(|&a| a == 0.0))
    }

    /// True when `f(0) = 0`, so that nonnegative data stay nonnegative.
    pub fn vanishes_at_zero(&self) -> bool {
        match &self.kind {
            MobilityKind::Polynomial(c) => c.first().copied().unwrap_or(0.0) == 0.0,
            _ => true,
        }
    }

    /// True for kinds that only accept nonnegative arguments.
    pub fn requires_nonnegative(&self) -> bool {
        matches!(self.kind, MobilityKind::Power { .. })
    }

    fn natural_domain(&self, lo: f64, hi: f64) -> (f64, f64) {
        match &self.kind {
            MobilityKind::Power { .. } => (lo.max(0.0), hi.max(0.0)),
            MobilityKind::LogisticPower { alpha } if !is_integer(*alpha) => {
                (lo.min(1.0), hi.min(1.0))
            }
            _ => (lo, hi),
        }
    }

    fn check_domain(&self, xi: f64) -> Result<()> {
        if !xi.is_finite() {
            return Err(Error::Domain(format!("non-finite argument {xi}")));
        }
        match &self.kind {
            MobilityKind::Power { m } if xi < 0.0 => Err(Error::Domain(format!(
                "power mobility u^{m} evaluated at negative u = {xi} (positivity lost)"
            ))),
            MobilityKind::LogisticPower { alpha } if !is_integer(*alpha) && xi > 1.0 => {
                Err(Error::Domain(format!(
                    "logistic-power mobility with non-integer exponent {alpha} evaluated at u = {xi} > 1"
                )))
            }
            _ => Ok(()),
        }
    }

    /// `f(ξ)` with domain checking.
    pub fn eval(&self, xi: f64) -> Result<f64> {
        self.check_domain(xi)?;
        Ok(self.value(xi))
    }

    /// `f'(ξ)` with domain checking.
    pub fn deriv(&self, xi: f64) -> Result<f64> {
        self.check_domain(xi)?;
        Ok(self.derivative(xi))
    }

    /// Unchecked `f(ξ)`; callers guarantee `ξ` lies in the domain.
    #[inline]
    pub(crate) fn value(&self, xi: f64) -> f64 {
        match &self.kind {
            MobilityKind::Polynomial(c) => poly_eval(c, xi),
            MobilityKind::Power { m } => {
                if xi <= 0.0 {
                    0.0
                } else if *m == 2.0 {
                    xi * xi
                } else {
                    xi.powf(*m)
                }
            }
            MobilityKind::Logistic => xi * (1.0 - xi),
            MobilityKind::LogisticPower { alpha } => {
                if is_integer(*alpha) {
                    xi * (1.0 - xi).powi(*alpha as i32)
                } else {
                    xi * (1.0 - xi).max(0.0).powf(*alpha)
                }
            }
        }
    }

    #[inline]
    pub(crate) fn derivative(&self, xi: f64) -> f64 {
        match &self.kind {
            MobilityKind::Polynomial(c) => {
                c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (j, &a)| acc * xi + j as f64 * a)
            }
            MobilityKind::Power { m } => {
                if xi < 0.0 || (xi == 0.0 && *m > 1.0) {
                    0.0
                } else if xi == 0.0 {
                    if *m == 1.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    m * xi.powf(m - 1.0)
                }
            }
            MobilityKind::Logistic => 1.0 - 2.0 * xi,
            MobilityKind::LogisticPower { alpha } => {
                let one_minus = if is_integer(*alpha) { 1.0 - xi } else { (1.0 - xi).max(0.0) };
                let base = if is_integer(*alpha) {
                    one_minus.powi(*alpha as i32 - 1)
                } else {
                    one_minus.powf(alpha - 1.0)
                };
                base * (1.0 - (1.0 + alpha) * xi)
            }
        }
    }

    /// Suprema of `|f|` and `|f'|` over `[-M, M]` (`[0, M]` for power kinds).
    pub fn bounds(&self, m: f64) -> MobilityBounds {
        self.bounds_on(-m.abs(), m.abs())
    }

    /// Suprema of `|f|` and `|f'|` over `[lo, hi]` intersected with the
    /// mobility's domain, from endpoint and critical-point evaluation.
    pub fn bounds_on(&self, lo: f64, hi: f64) -> MobilityBounds {
        let (lo, hi) = self.natural_domain(lo, hi);
        let mut f_pts = vec![lo, hi];
        let mut d_pts = vec![lo, hi];
        let inside = |x: f64| x > lo && x < hi;
        match &self.kind {
            MobilityKind::Polynomial(c) => {
                let d1 = poly_deriv(c);
                let d2 = poly_deriv(&d1);
                f_pts.extend(poly_sign_changes(&d1, lo, hi));
                d_pts.extend(poly_sign_changes(&d2, lo, hi));
            }
            MobilityKind::Power { .. } => {}
            MobilityKind::Logistic => f_pts.push(0.5),
            MobilityKind::LogisticPower { alpha } => {
                if is_integer(*alpha) {
                    let c = logistic_power_coefficients(*alpha as u32);
                    let d1 = poly_deriv(&c);
                    let d2 = poly_deriv(&d1);
                    f_pts.extend(poly_sign_changes(&d1, lo, hi));
                    d_pts.extend(poly_sign_changes(&d2, lo, hi));
                } else {
                    f_pts.extend([1.0 / (1.0 + alpha), 1.0]);
                    d_pts.extend([2.0 / (1.0 + alpha), 1.0]);
                }
            }
        }
        let sup = |pts: &[f64], g: &dyn Fn(f64) -> f64| {
            pts.iter()
                .filter(|&&x| x == lo || x == hi || inside(x))
                .map(|&x| g(x).abs())
                .fold(0.0, f64::max)
        };
        MobilityBounds {
            sup_f: sup(&f_pts, &|x| self.value(x)),
            sup_fprime: sup(&d_pts, &|x| self.derivative(x)),
        }
    }
}
