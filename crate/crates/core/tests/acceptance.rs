//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any of them fails.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlclaw::convolve::convolve;
use nlclaw::field::{norm_l1, norm_linf, total_variation, Field, Grid};
use nlclaw::init::U0Spec;
use nlclaw::lab::{
    amplitude_perturbation, bump_perturbation, fit_line, linfty_bound_curve, linfty_bound_for, preset_cgv, preset_hks,
    rate_study, shift_perturbation, stability_study, tv_bound_curve, uniform_times, StabilityOptions, TvRate,
};
use nlclaw::physics::{make_kernel, KernelSpec, Mobility};
use nlclaw::solver::{picard_iterate, picard_threshold, run, Problem, State};
use nlclaw::verify::{check_lemma_a, check_lemma_b, kuznetsov_delta, random_lemma_instance, time_modulus, MollifierPair};

use common::{direct_convolution, rel_linf, restrict_trajectory};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn step_u0() -> U0Spec {
    U0Spec::Step { left: 0.8, right: 0.2, interface: 0.0 }
}

fn gaussian_problem(n: usize, sigma: f64, epsilon: f64, horizon: f64) -> Problem {
    let g = Grid::line(n, 1.0).unwrap();
    let kernel = make_kernel(&KernelSpec::GaussianGradient { sigma, strength: 1.0 }, &g).unwrap();
    Problem::new(step_u0().build(&g).unwrap(), Arc::new(kernel), Mobility::logistic(), epsilon, horizon).unwrap()
}

fn sine_half() -> U0Spec {
    U0Spec::Sine { mean: 0.5, amplitude: 0.4, frequency: 1.0 }
}

fn conservation() -> Outcome {
    let start = Instant::now();
    let p = preset_hks(256, 1e-3, 0.2, &sine_half()).unwrap();
    let out = run(&p, &uniform_times(0.2, 20)).unwrap();
    let elapsed = start.elapsed();
    let rows = out.diagnostics.rows();
    let m0 = rows[0].mass;
    let drift = rows.iter().map(|r| ((r.mass - m0) / m0).abs()).fold(0.0, f64::max);
    let rise = rows.windows(2).map(|w| w[1].l1 - w[0].l1).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        drift <= 1e-12 && rise <= 1e-10 && within(elapsed, 10.0),
        format!("mass drift {drift:.2e}, max L1 rise {rise:.2e}, {} steps, {elapsed:.2?}", rows.len()),
    )
}

/// Attractive Gaussian-gradient kernel with `f(u) = u²` and a unit bump.
fn quadratic_bump_problem() -> Problem {
    let g = Grid::line(256, 1.0).unwrap();
    let bump = U0Spec::GaussianBump { center: 0.0, width: 0.08, amplitude: 1.0, base: 0.0 }.build(&g).unwrap();
    let top = bump.max();
    let u0 = bump.map(|x| x / top);
    let kernel = make_kernel(&KernelSpec::GaussianGradient { sigma: 0.1, strength: 1.0 }, &g).unwrap();
    Problem::new(u0, Arc::new(kernel), Mobility::polynomial(vec![0.0, 0.0, 1.0]).unwrap(), 1e-3, 1.0).unwrap()
}

fn linfty_and_tv() -> (Outcome, Outcome) {
    let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.3 / 400.0).collect();
    let closed = linfty_bound_curve(1.0, 1.0, 1.0, &times).unwrap();
    let ode_err = closed
        .curve
        .times
        .iter()
        .zip(&closed.curve.values)
        .map(|(t, y)| (y - t.exp() / (2.0 - t.exp())).abs())
        .fold(0.0, f64::max);
    let doubling_err = (closed.doubling_time - (4.0f64 / 3.0).ln()).abs();

    let p = quadratic_bump_problem();
    let probe = linfty_bound_for(&p, 1.0, &[0.0, p.horizon]).unwrap();
    let t_star = probe.doubling_time;
    let horizon = 0.99 * t_star;
    let times = uniform_times(horizon, 20);
    let p = Problem { horizon, ..p };
    let out = run(&p, &times).unwrap();
    let max_u = out.trajectory.iter().map(|s| norm_linf(&s.u).unwrap()).fold(0.0, f64::max);
    let linf_ok = ode_err <= 1e-8 && doubling_err <= 1e-8 && max_u <= 2.0 && out.blowup.is_none();
    let linf = outcome(
        linf_ok,
        format!("ODE err {ode_err:.2e}, doubling err {doubling_err:.2e}, T* {t_star:.4e}, max u {max_u:.6} <= 2"),
    );

    let bound = linfty_bound_for(&p, 1.0, &times).unwrap();
    let tv_curve = tv_bound_curve(&p, &bound.curve, &times, TvRate::Full).unwrap();
    let worst = out
        .trajectory
        .iter()
        .zip(&tv_curve.values)
        .map(|(s, b)| total_variation(&s.u).unwrap() / b)
        .fold(0.0, f64::max);
    let tv = outcome(worst <= 1.1, format!("max TV / bound {worst:.4} over {} outputs", out.trajectory.len()));
    (linf, tv)
}

fn viscosity_rate() -> Outcome {
    let start = Instant::now();
    let p = gaussian_problem(512, 0.05, 4e-3, 0.25);
    let study = rate_study(&p, &[4e-3, 2e-3, 1e-3, 5e-4], 0.25).unwrap();
    let elapsed = start.elapsed();
    let s = study.fitted_slope;
    outcome(
        (0.45..=1.1).contains(&s) && within(elapsed, 300.0),
        format!(
            "slope {s:.3} (R² {:.4}), distances {:.4?}, ref eps {:.2e}, {elapsed:.2?}",
            study.r_squared, study.distances, study.ref_epsilon
        ),
    )
}

fn lemma_suites() -> Outcome {
    let start = Instant::now();
    let g = Grid::line(64, 1.0).unwrap();
    let mut violations = [0usize; 2];
    let mut worst = [f64::INFINITY; 2];
    for trial in 0..100 {
        let inst = random_lemma_instance(&g, 20240917, trial).unwrap();
        for (k, check) in [check_lemma_a(&inst).unwrap(), check_lemma_b(&inst).unwrap()].iter().enumerate() {
            if !check.pass {
                violations[k] += 1;
            }
            worst[k] = worst[k].min(check.margin);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations == [0, 0] && within(elapsed, 60.0),
        format!(
            "violations A {} B {}, min margins {:.3e} / {:.3e}, {elapsed:.2?}",
            violations[0], violations[1], worst[0], worst[1]
        ),
    )
}

fn negative_part(x: f64) -> f64 {
    (-x).max(0.0)
}

fn kuznetsov() -> Outcome {
    let start = Instant::now();
    let coarse = gaussian_problem(64, 0.1, 0.0, 0.31);
    let times: Vec<f64> = (0..32).map(|i| i as f64 * 0.01).collect();
    let fine = gaussian_problem(1024, 0.1, 0.0, 0.31);
    let reference = restrict_trajectory(&run(&fine, &times).unwrap().trajectory, &coarse.grid);
    let viscous = restrict_trajectory(&run(&fine.with_epsilon(5e-3), &times).unwrap().trajectory, &coarse.grid);
    let scale = norm_l1(&coarse.u0).unwrap();
    let eta = 0.03;
    let delta_at = |u: &[State], v: &[State], d: f64| kuznetsov_delta(u, v, &coarse, MollifierPair::new(d, eta).unwrap()).unwrap().total();
    let self_small = delta_at(&reference, &reference, 0.04);
    let self_large = delta_at(&reference, &reference, 0.08);
    let visc_small = delta_at(&reference, &viscous, 0.04);
    let visc_large = delta_at(&reference, &viscous, 0.08);
    let ratio = negative_part(visc_small) / negative_part(visc_large);
    let elapsed = start.elapsed();
    let floor = -0.05 * scale;
    outcome(
        self_small >= floor && self_large >= floor && ratio >= 1.5 && within(elapsed, 120.0),
        format!(
            "reference Δ {self_small:.3e} / {self_large:.3e} (floor {floor:.3e}), viscous Δ {visc_small:.3e} / {visc_large:.3e}, ratio {ratio:.2}, {elapsed:.2?}"
        ),
    )
}

fn modulus_slope(p: &Problem, dt: f64, intervals: usize) -> f64 {
    let times: Vec<f64> = (0..=intervals).map(|i| i as f64 * dt).collect();
    let p = Problem { horizon: times[intervals], ..p.clone() };
    let traj = run(&p, &times).unwrap().trajectory;
    let lags: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|k| k * dt).collect();
    let moduli: Vec<f64> = lags.iter().map(|l| time_modulus(&traj, *l).unwrap()).collect();
    let lx: Vec<f64> = lags.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = moduli.iter().map(|x| x.ln()).collect();
    fit_line(&lx, &ly).0
}

fn time_moduli() -> Outcome {
    let start = Instant::now();
    let inviscid = modulus_slope(&gaussian_problem(2048, 0.1, 0.0, 1.0), 0.002, 64);
    let viscous = modulus_slope(&gaussian_problem(256, 0.1, 0.1, 1.0), 0.0005, 32);
    outcome(
        inviscid >= 0.9 && viscous >= 0.45,
        format!("reference slope {inviscid:.3}, viscous slope {viscous:.3}, {:.2?}", start.elapsed()),
    )
}

fn picard() -> Outcome {
    let g = Grid::line(128, 1.0).unwrap();
    let kernel = Arc::new(make_kernel(&KernelSpec::GaussianGradient { sigma: 0.1, strength: 1.0 }, &g).unwrap());
    let u0 = sine_half().build(&g).unwrap();
    let frozen = Problem::new(u0.clone(), kernel.clone(), Mobility::zero(), 0.01, 1.0).unwrap();
    let zero = picard_iterate(&frozen, 0.05, 2).unwrap();
    let zero_ok = zero.contraction_factors == vec![0.0];

    let p = Problem::new(u0, kernel, Mobility::logistic(), 0.01, 1.0).unwrap();
    let t_short = picard_threshold(&p, 1.0).unwrap();
    let r = picard_iterate(&p, t_short, 6).unwrap();
    let factors = &r.contraction_factors[..4];
    let worst = factors.iter().copied().fold(0.0, f64::max);
    let shown: Vec<String> = factors.iter().map(|f| format!("{f:.2e}")).collect();
    let note = if worst > 0.5 { " (above 1/2)" } else { "" };
    outcome(
        zero_ok && r.contractive && factors.len() == 4 && worst <= 0.6,
        format!("f=0 factors {:?}, T_short {t_short:.3e}, factors 2-5 [{}]{note}", zero.contraction_factors, shown.join(", ")),
    )
}

fn stability() -> Outcome {
    let start = Instant::now();
    let horizon = 0.05;
    let p = preset_hks(256, 1e-3, horizon, &sine_half()).unwrap();
    let perturbations = vec![
        ("shift".to_string(), shift_perturbation(&p.u0, 2)),
        ("amplitude".to_string(), amplitude_perturbation(&p.u0, 0.05)),
        ("bump".to_string(), bump_perturbation(&p.u0, 0.2, 0.03, 0.05).unwrap()),
    ];
    let table = stability_study(&p, &perturbations, horizon, &StabilityOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let amps: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{} {:.3}", r.label, r.amplification.unwrap_or(f64::NAN)))
        .collect();
    outcome(
        table.all_within_prediction() && table.rows.iter().all(|r| r.amplification.is_some()) && within(elapsed, 60.0),
        format!("amplifications [{}] vs prediction {:.3e}, {elapsed:.2?}", amps.join(", "), table.prediction),
    )
}

fn range_preservation() -> Outcome {
    let hks = preset_hks(256, 1e-3, 0.2, &sine_half()).unwrap();
    let out = run(&hks, &uniform_times(0.2, 20)).unwrap();
    let (lo, hi) = out.trajectory.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.u.min()), hi.max(s.u.max()))
    });
    let cgv = preset_cgv(256, 2.0, 1e-3, 0.2, &U0Spec::Sine { mean: 1.0, amplitude: 0.5, frequency: 1.0 }).unwrap();
    let out = run(&cgv, &uniform_times(0.2, 20)).unwrap();
    let cgv_min = out.trajectory.iter().map(|s| s.u.min()).fold(f64::INFINITY, f64::min);
    outcome(
        lo >= 0.0 && hi <= 1.0 && cgv_min >= 0.0 && out.blowup.is_none(),
        format!("HKS range [{lo:.6}, {hi:.6}], CGV min {cgv_min:.6}"),
    )
}

fn random_kernel(rng: &mut ChaCha8Rng, g: &Grid) -> KernelSpec {
    let h = g.spacing();
    match rng.random_range(0..5) {
        0 => KernelSpec::Hks,
        1 => KernelSpec::Cgv,
        2 => KernelSpec::GaussianGradient {
            sigma: rng.random_range(2.5 * h..0.3),
            strength: rng.random_range(-2.0..2.0),
        },
        3 => KernelSpec::Box { a: rng.random_range(h..0.45) },
        _ => KernelSpec::Sampled((0..g.dim()).map(|_| (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()),
    }
}

fn convolution_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for trial in 0..50 {
        let n = [16, 32, 64][trial % 3];
        let dim = if n <= 32 && trial % 2 == 1 { 2 } else { 1 };
        let g = Grid::new(dim, n, 1.0).unwrap();
        let spec = random_kernel(&mut rng, &g);
        let kernel = make_kernel(&spec, &g).unwrap();
        let u = Field::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let spectral = convolve(&kernel, &u).unwrap();
        for (a, exact) in direct_convolution(&kernel, &u).iter().enumerate() {
            worst = worst.max(rel_linf(spectral.force.component(a), exact));
        }
    }
    outcome(worst <= 1e-11, format!("max relative L∞ error {worst:.2e} over 50 pairs"))
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 conservation and decay", conservation()));
    let (linf, tv) = linfty_and_tv();
    results.push(("2 local L-infinity bound", linf));
    results.push(("3 TV propagation", tv));
    results.push(("4 viscosity rate", viscosity_rate()));
    results.push(("5 lemma suites", lemma_suites()));
    results.push(("6 Kuznetsov functional", kuznetsov()));
    results.push(("7 time moduli", time_moduli()));
    results.push(("8 Picard contraction", picard()));
    results.push(("9 L1 stability", stability()));
    results.push(("10 range preservation", range_preservation()));
    results.push(("11 convolution oracle", convolution_oracle()));
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
