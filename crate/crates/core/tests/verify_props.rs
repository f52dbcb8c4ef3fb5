use std::sync::Arc;

use nlclaw::field::{Field, Grid};
use nlclaw::init::U0Spec;
use nlclaw::lab::uniform_times;
use nlclaw::physics::{make_kernel, KernelSpec, Mobility};
use nlclaw::solver::{run, Problem, State};
use nlclaw::verify::{
    check_lemma_a, check_lemma_b, entropy_residual, kuznetsov_delta, random_lemma_instance, time_modulus, KruzhkovLevel,
    MollifierPair,
};
use proptest::prelude::*;

fn constant_trajectory(g: Grid, c: f64, count: usize, dt: f64) -> Vec<State> {
    (0..count)
        .map(|i| State { time: i as f64 * dt, u: Field::constant(g, c), step_count: i, blown_up: false })
        .collect()
}

fn gaussian_problem(g: Grid, eps: f64) -> Problem {
    let k = make_kernel(&KernelSpec::GaussianGradient { sigma: 0.1, strength: 1.0 }, &g).unwrap();
    let u0 = U0Spec::Step { left: 0.8, right: 0.2, interface: 0.0 }.build(&g).unwrap();
    Problem::new(u0, Arc::new(k), Mobility::logistic(), eps, 0.2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lemma_sides_under_sign_flip(seed in any::<u64>(), trial in 0u64..1000) {
        let g = Grid::line(64, 1.0).unwrap();
        let inst = random_lemma_instance(&g, seed, trial).unwrap();
        let flipped = inst.with_phi(inst.phi.map(|x| -x)).unwrap();
        for check in [check_lemma_a, check_lemma_b] {
            let (a, b) = (check(&inst).unwrap(), check(&flipped).unwrap());
            prop_assert!((a.lhs + b.lhs).abs() <= 1e-12 * a.lhs.abs().max(1e-300));
            prop_assert_eq!(a.rhs, b.rhs);
            prop_assert!(a.pass && b.pass, "lhs {} rhs {}", a.lhs, a.rhs);
        }
    }

    #[test]
    fn lemma_checks_are_pure(seed in any::<u64>(), trial in 0u64..1000) {
        let g = Grid::line(32, 1.0).unwrap();
        let (x, y) = (random_lemma_instance(&g, seed, trial).unwrap(), random_lemma_instance(&g, seed, trial).unwrap());
        prop_assert_eq!(check_lemma_a(&x).unwrap(), check_lemma_a(&y).unwrap());
        prop_assert_eq!(check_lemma_b(&x).unwrap(), check_lemma_b(&y).unwrap());
    }

    #[test]
    fn constant_states_have_no_entropy_residual(c in -1.0..2.0f64, k in -1.0..2.0f64) {
        let g = Grid::line(32, 1.0).unwrap();
        let p = gaussian_problem(g, 0.0);
        let traj = constant_trajectory(g, c, 4, 0.01);
        let r = entropy_residual(&traj, &p, &[KruzhkovLevel::new(k), KruzhkovLevel::new(c)]).unwrap();
        prop_assert!(r.max_positive_residual <= 1e-12);
    }

    #[test]
    fn stationary_constants_leave_the_functional_at_zero(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let g = Grid::line(64, 1.0).unwrap();
        let p = gaussian_problem(g, 0.0);
        let (u, v) = (constant_trajectory(g, a, 8, 0.02), constant_trajectory(g, b, 8, 0.02));
        let t = kuznetsov_delta(&u, &v, &p, MollifierPair::new(0.1, 0.04).unwrap()).unwrap();
        prop_assert!(t.total().abs() <= 1e-12, "{t:?}");
    }
}

#[test]
fn functional_vanishes_on_zero_trajectories() {
    let g = Grid::line(64, 1.0).unwrap();
    let p = gaussian_problem(g, 0.0);
    let z = constant_trajectory(g, 0.0, 6, 0.05);
    assert_eq!(kuznetsov_delta(&z, &z, &p, MollifierPair::new(0.1, 0.05).unwrap()).unwrap().total(), 0.0);
}

#[test]
fn verify_outputs_are_bitwise_reproducible() {
    let g = Grid::line(64, 1.0).unwrap();
    let p = gaussian_problem(g, 1e-3);
    let traj = run(&p, &uniform_times(0.2, 8)).unwrap().trajectory;
    let levels: Vec<KruzhkovLevel> = [0.2, 0.5, 0.8].iter().map(|k| KruzhkovLevel::new(*k)).collect();
    let a = entropy_residual(&traj, &p, &levels).unwrap();
    let b = entropy_residual(&traj, &p, &levels).unwrap();
    assert_eq!(a.max_positive_residual.to_bits(), b.max_positive_residual.to_bits());
    assert_eq!(a.residual_field_at_worst, b.residual_field_at_worst);
    let m = MollifierPair::new(0.08, 0.05).unwrap();
    assert_eq!(kuznetsov_delta(&traj, &traj, &p, m).unwrap(), kuznetsov_delta(&traj, &traj, &p, m).unwrap());
    assert_eq!(time_modulus(&traj, 0.05).unwrap(), time_modulus(&traj, 0.05).unwrap());
}

#[test]
fn viscous_entropy_residual_shrinks_with_viscosity() {
    let g = Grid::line(256, 1.0).unwrap();
    let levels: Vec<KruzhkovLevel> = [0.3, 0.5, 0.7].iter().map(|k| KruzhkovLevel::new(*k)).collect();
    let residual = |eps: f64| {
        let p = gaussian_problem(g, eps);
        let traj = run(&p, &uniform_times(0.2, 20)).unwrap().trajectory;
        entropy_residual(&traj, &p, &levels).unwrap().max_positive_residual
    };
    let (large, small) = (residual(2e-2), residual(2e-3));
    assert!(small < large, "eps 2e-2: {large}, eps 2e-3: {small}");
}
