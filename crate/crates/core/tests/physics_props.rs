mod common;

use nlclaw::convolve::{convolve, lipschitz_estimate};
use nlclaw::field::{norm_l1, norm_linf, total_variation, Field, Grid};
use nlclaw::physics::{make_kernel, KernelSpec, Mobility};
use nlclaw::spectral;
use proptest::prelude::*;

use common::{direct_convolution, rel_linf};

fn analytic_specs() -> Vec<KernelSpec> {
    vec![KernelSpec::Hks, KernelSpec::Cgv, KernelSpec::GaussianGradient { sigma: 0.12, strength: -1.5 }]
}

fn kernel_spec() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        Just(KernelSpec::Hks),
        Just(KernelSpec::Cgv),
        (0.1..0.3f64, -2.0..2.0f64).prop_map(|(sigma, strength)| KernelSpec::GaussianGradient { sigma, strength }),
        (0.05..0.45f64).prop_map(|a| KernelSpec::Box { a }),
    ]
}

fn mobility() -> impl Strategy<Value = Mobility> {
    prop_oneof![
        Just(Mobility::logistic()),
        Just(Mobility::linear()),
        (1.0..3.0f64).prop_map(|a| Mobility::logistic_power(a).unwrap()),
        prop::collection::vec(-2.0..2.0f64, 1..5).prop_map(|c| Mobility::polynomial(c).unwrap()),
    ]
}

#[test]
fn analytic_samples_round_trip_through_the_spectrum() {
    for dim in [1, 2] {
        let g = Grid::new(dim, 32, 1.0).unwrap();
        for spec in analytic_specs() {
            let k = make_kernel(&spec, &g).unwrap();
            for c in k.samples().components() {
                let back = spectral::inverse(&g, &spectral::forward(&g, c));
                assert!(rel_linf(&back, c) <= 1e-10, "{spec:?} d={dim}");
            }
        }
    }
}

#[test]
fn hks_force_of_a_constant_vanishes() {
    let g = Grid::line(128, 1.0).unwrap();
    let k = make_kernel(&KernelSpec::Hks, &g).unwrap();
    let out = convolve(&k, &Field::constant(g, 0.37)).unwrap();
    assert!(out.force.linf() <= 1e-15, "{}", out.force.linf());
}

#[test]
fn cgv_zero_mode_is_exactly_zero() {
    for dim in [1, 2] {
        let g = Grid::new(dim, 16, 1.0).unwrap();
        let k = make_kernel(&KernelSpec::Cgv, &g).unwrap();
        for a in 0..dim {
            assert_eq!(k.multiplier(a)[0].norm(), 0.0);
        }
        assert_eq!(k.divergence_multiplier()[0].norm(), 0.0);
    }
}

#[test]
fn force_is_bounded_by_kernel_sup_times_mass() {
    use rand::{RngExt, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let g = Grid::line(64, 1.0).unwrap();
    let specs = [KernelSpec::Hks, KernelSpec::GaussianGradient { sigma: 0.1, strength: 1.0 }, KernelSpec::Box { a: 0.2 }];
    let mut violations = 0;
    for trial in 0..100 {
        let k = make_kernel(&specs[trial % 3], &g).unwrap();
        let u = Field::new(g, (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let v = convolve(&k, &u).unwrap().force.linf();
        let bound = k.stats().linf_norm * norm_l1(&u).unwrap();
        if v > bound * (1.0 + 1e-10) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn lipschitz_estimate_for_aligned_steps() {
    let g = Grid::line(128, 1.0).unwrap();
    for spec in [KernelSpec::GaussianGradient { sigma: 0.08, strength: 1.0 }, KernelSpec::Box { a: 0.1 }] {
        let k = make_kernel(&spec, &g).unwrap();
        let u = Field::from_cell_averages(g, |x| if x[0].abs() < 0.25 { 1.0 } else { 0.3 }).unwrap();
        let lip = lipschitz_estimate(&convolve(&k, &u).unwrap().force);
        let s = k.stats();
        let bound = s.tv * norm_linf(&u).unwrap() + s.linf_norm * total_variation(&u).unwrap();
        assert!(lip <= 2.0 * bound, "{spec:?}: {lip} > 2 * {bound}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convolution_is_linear(spec in kernel_spec(), u in prop::collection::vec(-1.0..1.0f64, 64),
                             w in prop::collection::vec(-1.0..1.0f64, 64), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let g = Grid::line(64, 1.0).unwrap();
        let k = make_kernel(&spec, &g).unwrap();
        let (u, w) = (Field::new(g, u).unwrap(), Field::new(g, w).unwrap());
        let combined = convolve(&k, &u.lincomb(a, &w, b).unwrap()).unwrap();
        let (fu, fw) = (convolve(&k, &u).unwrap(), convolve(&k, &w).unwrap());
        let expect: Vec<f64> = fu.force.component(0).iter().zip(fw.force.component(0)).map(|(x, y)| a * x + b * y).collect();
        let scale = expect.iter().fold(1e-300_f64, |m, x| m.max(x.abs()));
        let err = combined.force.component(0).iter().zip(&expect).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(err <= 1e-12 * scale.max(fu.force.linf() * a.abs() + fw.force.linf() * b.abs()));
    }

    #[test]
    fn convolution_commutes_with_shifts(spec in kernel_spec(), u in prop::collection::vec(-1.0..1.0f64, 64), s in -5isize..6) {
        let g = Grid::line(64, 1.0).unwrap();
        let k = make_kernel(&spec, &g).unwrap();
        let u = Field::new(g, u).unwrap();
        let shifted_then = convolve(&k, &u.shifted(0, s)).unwrap().force;
        let then_shifted = convolve(&k, &u).unwrap().force.shifted(0, s);
        let scale = then_shifted.linf().max(1e-300);
        for (x, y) in shifted_then.component(0).iter().zip(then_shifted.component(0)) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn spectral_matches_direct_sum(spec in kernel_spec(), u in prop::collection::vec(-1.0..1.0f64, 256)) {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let spec = match spec {
            KernelSpec::GaussianGradient { strength, .. } => KernelSpec::GaussianGradient { sigma: 0.2, strength },
            other => other,
        };
        let k = make_kernel(&spec, &g).unwrap();
        let u = Field::new(g, u).unwrap();
        let fast = convolve(&k, &u).unwrap();
        for (a, exact) in direct_convolution(&k, &u).iter().enumerate() {
            prop_assert!(rel_linf(fast.force.component(a), exact) <= 1e-11);
        }
    }

    #[test]
    fn mobility_bounds_are_monotone(f in mobility(), m1 in 0.0..3.0f64, extra in 0.0..3.0f64) {
        let (lo, hi) = (f.bounds(m1), f.bounds(m1 + extra));
        prop_assert!(lo.sup_f <= hi.sup_f && lo.sup_fprime <= hi.sup_fprime);
    }
}
