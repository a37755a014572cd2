//! The acceptance suite. Every criterion prints one `criterion NN ... PASS|FAIL`
//! line (visible with `--nocapture`) and then asserts it.
//!
//! Run with `cargo test -p spenkf-lab --test acceptance -- --nocapture --include-ignored`.

// Step-indexed loops compare two runs at the same step.
#![allow(clippy::needless_range_loop)]

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng as _;
use spenkf_core::discrepancy::{
    discrepancy_monte_carlo, expected_dp, po_mean_identity_check, po_observation_spread, po_variance_penalty,
    sampled_discrepancy, second_moment_dp, second_moment_dx, PerturbedInputs, PoCheckOptions,
};
use spenkf_core::expint::{expint, expint_scaled, expint_scaled_inverse, expint_scaled_inverse_odds};
use spenkf_core::gamma_ratio::{ratio_fourth_moment, ratio_mean, ratio_pdf, ratio_second_moment, GammaRatioSpec};
use spenkf_core::mc::{run_blocks, Execution, Merge, Moments};
use spenkf_core::mvspenkf::{mv_inflation_schedule, mv_initial_ensembles, mv_spenkf_run, DiagonalizableModel, MvTrajectory};
use spenkf_core::propagators::{ModelSequence, ModelTrajectory};
use spenkf_core::skf::{skf_closed_form, skf_run};
use spenkf_core::spenkf::{inflated_skf_run, inflation_schedule, sample_initial_ensemble, spenkf_run, theta_step, Inflation};
use spenkf_core::RngSpec;
use spenkf_lab::commands::cmd_mc_verify;
use spenkf_lab::config::{ExperimentConfig, ModelSpec};
use spenkf_oracle::{integrate_breakpoints, Tolerance};

fn report(id: u32, name: &str, passed: bool, detail: impl AsRef<str>) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("criterion {id:02} {name}: {tag} ({})", detail.as_ref());
    assert!(passed, "criterion {id} ({name}) failed: {}", detail.as_ref());
}

fn within_time(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("{:.3}s of {:.0}s", t.as_secs_f64(), limit.as_secs_f64()))
}

/// Log-spaced, with both endpoints hit exactly.
fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..n).map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (n - 1) as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

#[test]
fn criterion_01_exponential_integral_suite() {
    let start = Instant::now();
    let (mut rec_scaled, mut rec_plain, mut sandwich_ok, mut trip_y, mut trip_z) = (0.0f64, 0.0f64, true, 0.0f64, 0.0f64);
    for &nu in &log_grid(1.5, 100.0, 10) {
        for &z in &log_grid(1e-6, 700.0, 10) {
            // Recurrence, once on the scaled functions and once on E_nu itself.
            let (e0, e1) = (expint_scaled(nu, z).unwrap(), expint_scaled(nu + 1.0, z).unwrap());
            rec_scaled = rec_scaled.max((nu * e1 + z * e0 - 1.0).abs());
            let ez = (-z).exp();
            let plain = nu * expint(nu + 1.0, z).unwrap() + z * expint(nu, z).unwrap() - ez;
            rec_plain = rec_plain.max(plain.abs() / ez);
            sandwich_ok &= 1.0 / (z + nu) < e0 && e0 <= 1.0 / (z + nu - 1.0);

            // Forward then inverse on the value scale, and on the odds scale.
            let y = expint_scaled(nu + 1.0, z).unwrap();
            let back = expint_scaled(nu + 1.0, expint_scaled_inverse(nu, y).unwrap()).unwrap();
            trip_y = trip_y.max(((back - y) / y).abs());
            let w = z * e0;
            let z2 = expint_scaled_inverse_odds(nu, w / (1.0 - w)).unwrap();
            trip_z = trip_z.max(((z2 - z) / z).abs());
        }
    }
    let (fast, time) = within_time(start, Duration::from_secs(1));
    let passed = rec_scaled <= 1e-12 && rec_plain <= 1e-12 && sandwich_ok && trip_y <= 1e-10 && trip_z <= 1e-10 && fast;
    report(
        1,
        "exponential integral suite",
        passed,
        format!(
            "recurrence {rec_scaled:.1e} scaled / {rec_plain:.1e} plain, sandwich {sandwich_ok}, round trip {trip_y:.1e} on y / {trip_z:.1e} on z, {time}"
        ),
    );
}

#[test]
fn criterion_02_closed_form_matches_recursion() {
    let start = Instant::now();
    let mut rng = RngSpec::new(2, 0).rng();
    let mut worst: f64 = 0.0;
    for k in 0..1000u64 {
        let len = rng.random_range(1..=100);
        let model = ModelSequence::log_uniform(len, RngSpec::new(2, 1).fork(k)).unwrap();
        let (p0, r, x0) = (10f64.powf(rng.random_range(-2.0..2.0)), 10f64.powf(rng.random_range(-2.0..2.0)), rng.random_range(-3.0..3.0));
        let traj = ModelTrajectory::build(model, rng.random_range(-3.0..3.0), r, RngSpec::new(2, 2).fork(k)).unwrap();
        let run = skf_run(&traj, x0, p0).unwrap();
        for (i, st) in run.iter().enumerate() {
            let cf = skf_closed_form(&traj, x0, p0, i).unwrap();
            let mean_scale = st.mean_analysis.abs().max(st.var_analysis.sqrt());
            worst = worst
                .max(((cf.var_analysis - st.var_analysis) / st.var_analysis).abs())
                .max((cf.mean_analysis - st.mean_analysis).abs() / mean_scale);
        }
    }
    let (fast, time) = within_time(start, Duration::from_secs(5));
    report(2, "filter closed form vs recursion", worst <= 1e-10 && fast, format!("max relative gap {worst:.2e}, {time}"));
}

#[test]
fn criterion_03_variance_limit_for_exponential_growth() {
    let target = (std::f64::consts::E - 1.0) / std::f64::consts::E;
    let mut worst: f64 = 0.0;
    for (p0, r) in [(1.0, 1.0), (0.01, 3.0), (50.0, 0.2)] {
        let traj = ModelTrajectory::noiseless(ModelSequence::constant(0.5f64.exp(), 61).unwrap(), 0.0, r).unwrap();
        let run = skf_run(&traj, 0.0, p0).unwrap();
        worst = worst.max((run[60].var_analysis / r - target).abs());
    }
    report(3, "p_i^a/r -> (e-1)/e for m = sqrt(e)", worst <= 1e-6, format!("max gap at step 60: {worst:.2e}"));
}

fn theta_star_gap(alpha: f64) -> f64 {
    (theta_step(alpha, 1e8, 1.0, 1.0).unwrap() - alpha / (alpha - 1.0)).abs()
}

#[test]
fn criterion_04_theta_star_limit() {
    let gaps: Vec<(f64, f64)> = [2.0, 5.0, 50.0].iter().map(|&a| (a, theta_star_gap(a))).collect();
    let passed = gaps.iter().all(|&(_, g)| g <= 1e-6);
    report(4, "theta_step -> alpha/(alpha-1) at S p0/r = 1e8, alpha in {2, 5, 50}", passed, format!("gaps {gaps:?}"));
}

// At alpha = 1.5 the exact gap at S p0/r = 1e8 is 3.76e-4 (it scales like
// (r/(S p0))^(alpha-1)), so the 1e-6 tolerance cannot be met by any correct
// implementation. Kept as a red test rather than loosened.
#[test]
#[ignore = "unattainable: the exact theta gap at alpha = 1.5 is 3.76e-4 > 1e-6"]
fn criterion_04_theta_star_limit_alpha_one_and_a_half() {
    let gap = theta_star_gap(1.5);
    report(4, "theta_step -> alpha/(alpha-1) at S p0/r = 1e8, alpha = 1.5", gap <= 1e-6, format!("gap {gap:.3e}"));
}

/// Two-step trajectory with `S_1 = s`.
fn trajectory_with_s(s: f64, r: f64) -> ModelTrajectory {
    ModelTrajectory::noiseless(ModelSequence::new(vec![(s - 1.0).sqrt()]).unwrap(), 1.0, r).unwrap()
}

#[test]
fn criterion_05_inflation_zeroes_the_variance_bias() {
    let mut rng = RngSpec::new(5, 0).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let alpha = rng.random_range(1.5..100.0);
        let s = 10f64.powf(rng.random_range(0.01..6.0));
        let p0 = 10f64.powf(rng.random_range(-2.0..2.0));
        let r = 10f64.powf(rng.random_range(-2.0..2.0));
        let traj = trajectory_with_s(s, r);
        let theta = theta_step(alpha, traj.big_s()[1], p0, r).unwrap();
        let inputs = PerturbedInputs::new(theta * p0, 0.0, p0, 0.0, alpha).unwrap();
        let pa = skf_closed_form(&traj, 0.0, p0, 1).unwrap().var_analysis;
        worst = worst.max(expected_dp(&traj, &inputs, 1).unwrap().abs() / pa);
    }
    report(5, "|E[dp_i]| <= 1e-10 p_i^a at p~0 = theta_i p0", worst <= 1e-10, format!("max |E[dp]|/p^a = {worst:.2e} over 20 tuples"));
}

#[test]
fn criterion_06_sequential_factors_reproduce_initial_theta_runs() {
    let mut worst_exact: f64 = 0.0;
    let mut worst_ensemble: f64 = 0.0;
    for k in 0..20u64 {
        let model = ModelSequence::log_uniform(10, RngSpec::new(6, 1).fork(k)).unwrap();
        let traj = ModelTrajectory::build(model, 1.0, 0.7, RngSpec::new(6, 2).fork(k)).unwrap();
        let (alpha, p0, xt) = (2.0 + k as f64, 1.3, -0.4);
        let sched = inflation_schedule(&traj, alpha, p0, xt).unwrap();

        // Exact variance arithmetic.
        let seq = inflated_skf_run(&traj, xt, p0, &sched).unwrap();
        for i in 0..traj.len() {
            let direct = skf_run(&traj, xt, sched.theta[i] * p0).unwrap()[i];
            let scale = direct.mean_analysis.abs().max(direct.var_analysis.sqrt());
            worst_exact = worst_exact
                .max(((seq[i].var_analysis - direct.var_analysis) / direct.var_analysis).abs())
                .max((seq[i].mean_analysis - direct.mean_analysis).abs() / scale);
        }

        // A sampled ensemble, rescaled to theta_i times its own variance.
        let n = 2 * alpha as usize;
        let prior = sample_initial_ensemble(n, p0, xt, &mut RngSpec::new(6, 3).fork(k).rng()).unwrap();
        let run = spenkf_run(&traj, &prior, Inflation::Sequential(&sched)).unwrap();
        for i in 0..traj.len() {
            let start = prior.rescaled_to(sched.theta[i] * prior.sampled_var).unwrap();
            let direct = &spenkf_run(&traj, &start, Inflation::None).unwrap()[i];
            let scale = direct.mean.abs().max(direct.sampled_var.sqrt());
            worst_ensemble = worst_ensemble
                .max(((run[i].sampled_var - direct.sampled_var) / direct.sampled_var).abs())
                .max((run[i].mean - direct.mean).abs() / scale);
        }
    }
    let passed = worst_exact <= 1e-10 && worst_ensemble <= 1e-10;
    report(6, "sequential phi/psi equals initial-theta_i runs", passed, format!("max gap {worst_exact:.2e} exact, {worst_ensemble:.2e} ensemble"));
}

#[test]
fn criterion_07_inflation_bounds() {
    let config = ProptestConfig { cases: 10_000, failure_persistence: None, ..ProptestConfig::default() };
    let outcome = proptest::test_runner::TestRunner::new(config).run(
        &(any::<u64>(), 1usize..60, 3usize..400, -3.0f64..3.0, -3.0f64..3.0, -2.0f64..2.0),
        |(seed, len, n, lp0, lr, xt)| {
            let model = ModelSequence::log_uniform(len, RngSpec::new(seed, 1)).unwrap();
            let traj = ModelTrajectory::build(model, 0.0, 10f64.powf(lr), RngSpec::new(seed, 2)).unwrap();
            let alpha = n as f64 / 2.0;
            let s = inflation_schedule(&traj, alpha, 10f64.powf(lp0), xt).unwrap();
            let star = alpha / (alpha - 1.0);
            prop_assert_eq!(s.theta_star, star);
            for i in 0..s.len() {
                prop_assert!((1.0..=star).contains(&s.phi[i]), "phi_{} = {}", i, s.phi[i]);
                prop_assert!((1.0..=star).contains(&s.theta[i]), "theta_{} = {}", i, s.theta[i]);
                if i + 1 < s.len() {
                    prop_assert!(s.theta[i] <= s.theta[i + 1]);
                }
            }
            Ok(())
        },
    );
    let detail = match &outcome {
        Ok(()) => "10000 random schedules".to_string(),
        Err(e) => e.to_string(),
    };
    report(7, "1 <= phi_i <= theta*, 1 <= theta_i <= theta_{i+1} <= theta*", outcome.is_ok(), detail);
}

/// Integral of `g(y) ratio_pdf(y)` over the support, split where the mass is.
fn pdf_integral(spec: &GammaRatioSpec, g: impl Fn(f64) -> f64) -> f64 {
    let sd = spec.p() / spec.alpha().sqrt();
    let mut xs: Vec<f64> = (-8..=40).map(|k| spec.p() + k as f64 * sd / 2.0).filter(|&x| x > 0.0).collect();
    xs.insert(0, 0.0);
    let (lo, hi) = spec.support();
    let mut ys: Vec<f64> = xs.iter().map(|&x| spec.transform(x)).chain([lo, hi]).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let tol = Tolerance { abs: 0.0, rel: 1e-11, max_intervals: 20_000 };
    integrate_breakpoints(&|y| g(y) * ratio_pdf(spec, y), &ys, tol).unwrap().value
}

#[test]
fn criterion_08_gamma_ratio_moments_match_quadrature() {
    let mut rng = RngSpec::new(8, 0).rng();
    let (mut worst_mass, mut worst_moment): (f64, f64) = (0.0, 0.0);
    for k in 0..20 {
        let alpha = 10f64.powf(rng.random_range(0.2..2.0));
        let (p, c, d) = (10f64.powf(rng.random_range(-1.0..1.0)), 10f64.powf(rng.random_range(-1.0..1.0)), 10f64.powf(rng.random_range(-1.0..1.0)));
        let a = rng.random_range(-2.0..2.0);
        // Every other spec has b = 0 so the fourth moment is defined.
        let b = if k % 2 == 0 { 0.0 } else { rng.random_range(-2.0..2.0) };
        let spec = GammaRatioSpec::new(a, b, c, d, alpha, p).unwrap();
        worst_mass = worst_mass.max((pdf_integral(&spec, |_| 1.0) - 1.0).abs());
        let mut moments = vec![(ratio_mean(&spec).unwrap(), 1), (ratio_second_moment(&spec).unwrap(), 2)];
        if b == 0.0 {
            moments.push((ratio_fourth_moment(&spec).unwrap(), 4));
        }
        for (analytic, k) in moments {
            let quad = pdf_integral(&spec, |y| y.powi(k));
            worst_moment = worst_moment.max(((analytic - quad) / quad).abs());
        }
    }
    let passed = worst_mass <= 1e-8 && worst_moment <= 1e-7;
    report(8, "gamma-ratio moments vs quadrature", passed, format!("max |mass - 1| = {worst_mass:.2e}, max rel moment gap {worst_moment:.2e}"));
}

#[derive(Default, Clone, Copy)]
struct SquareMoments {
    dp2: Moments,
    dx2: Moments,
}

impl Merge for SquareMoments {
    fn merge(&mut self, other: Self) {
        self.dp2.merge(other.dp2);
        self.dx2.merge(other.dx2);
    }
}

#[test]
fn criterion_09_monte_carlo_discrepancy_verification() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        seed: Some(9),
        steps: 20,
        ensemble_size: 8,
        p0: 1.0,
        x0: 0.2,
        p_tilde0: Some(1.4),
        x_tilde0: Some(-0.3),
        r: 0.8,
        model: ModelSpec::LogUniform,
        replicates: 100_000,
        ..Default::default()
    };
    // Means (and variances) through the mc-verify subcommand.
    let out = cmd_mc_verify(&cfg, Execution::Parallel).unwrap();
    let mut detail: Vec<String> = out.checks.iter().map(|c| c.line()).collect();
    let mut passed = out.passed();

    // Raw second moments through an independent sampling loop.
    let traj = ModelTrajectory::build(cfg.model_sequence().unwrap(), 0.0, cfg.r, cfg.stream(2)).unwrap();
    let inputs = PerturbedInputs::new(1.4, -0.3, 1.0, 0.2, 4.0).unwrap();
    let law = inputs.initial_variance_law();
    let acc = run_blocks(
        100_000,
        RngSpec::new(9, 40),
        Execution::Parallel,
        || vec![SquareMoments::default(); traj.len()],
        |rng, acc: &mut Vec<SquareMoments>| {
            let p_hat0 = rng.sample(law);
            for (i, slot) in acc.iter_mut().enumerate() {
                let (dp, dx) = sampled_discrepancy(&traj.ratios(i), traj.obs_variance(), &inputs, p_hat0);
                slot.dp2.push(dp * dp);
                slot.dx2.push(dx * dx);
            }
        },
    );
    let mut worst: f64 = 0.0;
    for (i, s) in acc.iter().enumerate() {
        let zp = (s.dp2.mean() - second_moment_dp(&traj, &inputs, i).unwrap()) / s.dp2.se_mean();
        let zx = (s.dx2.mean() - second_moment_dx(&traj, &inputs, i).unwrap()) / s.dx2.se_mean();
        worst = worst.max(zp.abs()).max(zx.abs());
    }
    passed &= worst <= 4.0;
    detail.push(format!("E[dp^2], E[dx^2] max |gap|/SE = {worst:.2}"));
    let (fast, time) = within_time(start, Duration::from_secs(30));
    detail.push(time);
    report(9, "Monte Carlo discrepancy moments within 4 SE", passed && fast, detail.join("; "));
}

#[test]
fn criterion_10_perturbed_observation_penalty() {
    let mut exact = true;
    for (r, alpha) in [(2.0, 4.0), (0.3, 7.5), (1.0, 1000.0), (5.5, 2.0)] {
        exact &= po_observation_spread(r, alpha) == r * r / alpha;
    }
    // The spread is the variance of R ~ Gamma(alpha, rate alpha/r); confirm by sampling.
    let (r, alpha) = (1.5, 5.0);
    let law = rand_distr::Gamma::new(alpha, r / alpha).unwrap();
    let spread = run_blocks(200_000, RngSpec::new(10, 0), Execution::Parallel, Moments::new, |rng, m: &mut Moments| {
        let x: f64 = rng.sample(law);
        m.push((x - r) * (x - r));
    });
    let spread_ok = (spread.mean() - po_observation_spread(r, alpha)).abs() <= 4.0 * spread.se_mean();

    let traj = ModelTrajectory::build(ModelSequence::log_uniform(15, RngSpec::new(10, 1)).unwrap(), 0.0, 1.2, RngSpec::new(10, 2)).unwrap();
    let mut cov = Vec::new();
    let mut cov_ok = true;
    for (k, alpha) in [2.0, 5.0, 10.0, 100.0, 1000.0].into_iter().enumerate() {
        let opts = PoCheckOptions { replicates: 200_000, rng: RngSpec::new(10, 3).fork(k as u64), exec: Execution::Parallel, perturb_observations: true };
        let rep = po_mean_identity_check(&traj, 0.9, alpha, 14, opts).unwrap();
        cov_ok &= rep.covariance_ok();
        cov.push(format!("{:.2}", rep.covariance / rep.se_covariance));
    }
    let ratio = po_variance_penalty(&traj, 0.9, 10.0, 14).unwrap() / po_variance_penalty(&traj, 0.9, 1000.0, 14).unwrap();
    let passed = exact && spread_ok && cov_ok && ratio > 50.0;
    report(
        10,
        "perturbed-observation penalty",
        passed,
        format!("spread exact {exact}, sampled spread ok {spread_ok}, cov z-scores [{}], penalty ratio alpha 10/1000 = {ratio:.1}", cov.join(", ")),
    );
}

fn random_basis(rng: &mut spenkf_core::rng::Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rng.random_range(-1.0..1.0) + if i == j { 2.5 } else { 0.0 })
}

#[test]
fn criterion_11_multivariate_reduction() {
    let mut rng = RngSpec::new(11, 0).rng();
    let mut worst: f64 = 0.0;
    for k in 0..10u64 {
        let n = 3;
        let z = random_basis(&mut rng, n);
        let m_seq: Vec<DVector<f64>> = (0..12).map(|_| DVector::from_fn(n, |_, _| rng.random_range(0.5..1.5))).collect();
        let p0 = DVector::from_fn(n, |_, _| rng.random_range(0.2..3.0));
        let r = DVector::from_fn(n, |_, _| rng.random_range(0.2..3.0));
        let model = DiagonalizableModel::new(z.clone(), &m_seq, p0, r).unwrap();
        let traj = MvTrajectory::build(&model, &DVector::from_element(n, 0.5), RngSpec::new(11, 1).fork(k)).unwrap();
        let v0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let ens_size = 6 + k as usize;
        let spec = RngSpec::new(11, 2).fork(k);
        let schedules = mv_inflation_schedule(&model, &traj, ens_size, &v0).unwrap();
        for sched in [None, Some(schedules.as_slice())] {
            let mv = mv_spenkf_run(&model, &traj, &v0, ens_size, spec, sched, Execution::Parallel).unwrap();
            let priors = mv_initial_ensembles(&model, &v0, ens_size, spec).unwrap();
            let scalar: Vec<_> = (0..n)
                .map(|j| {
                    let inflation = sched.map_or(Inflation::None, |s| Inflation::Sequential(&s[j]));
                    spenkf_run(traj.component(j), &priors[j], inflation).unwrap()
                })
                .collect();
            for (i, st) in mv.steps.iter().enumerate() {
                let mean = &z * DVector::from_fn(n, |j, _| scalar[j][i].mean);
                let cov = &z * DMatrix::from_diagonal(&DVector::from_fn(n, |j, _| scalar[j][i].sampled_var)) * z.transpose();
                worst = worst
                    .max((&st.mean - &mean).norm() / mean.norm().max(1.0))
                    .max((&st.covariance - &cov).norm() / cov.norm());
            }
        }
    }
    report(11, "Z-conjugated run equals scalar runs mapped through Z", worst <= 1e-10, format!("max relative gap {worst:.2e} over 10 bases"));
}

#[test]
fn criterion_12_large_ensembles_degenerate_to_the_exact_filter() {
    let traj = ModelTrajectory::build(ModelSequence::log_uniform(20, RngSpec::new(12, 1)).unwrap(), 0.0, 1.0, RngSpec::new(12, 2)).unwrap();
    let p0 = 1.0;
    let exact = skf_run(&traj, 0.0, p0).unwrap();
    let sizes = [8usize, 32, 128, 512];
    let runs: Vec<_> = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let inputs = PerturbedInputs::exact(p0, 0.0, n as f64 / 2.0).unwrap();
            discrepancy_monte_carlo(&traj, &inputs, 100_000, RngSpec::new(12, 3).fork(k as u64), Execution::Parallel).unwrap()
        })
        .collect();
    let mut monotone = true;
    let mut worst_last: f64 = 0.0;
    for i in 0..traj.len() {
        let bias: Vec<f64> = runs.iter().map(|r| r[i].dp.mean().abs()).collect();
        let var: Vec<f64> = runs.iter().map(|r| r[i].dp.variance()).collect();
        monotone &= bias.windows(2).all(|w| w[1] < w[0]) && var.windows(2).all(|w| w[1] < w[0]);
        let pa = exact[i].var_analysis;
        worst_last = worst_last.max(bias[3] / pa).max(var[3] / pa);
    }
    report(
        12,
        "|E[dp_i]| and Var[dp_i] shrink with N, below 1e-2 p_i^a at N = 512",
        monotone && worst_last < 1e-2,
        format!("monotone {monotone}, max ratio to p^a at N = 512: {worst_last:.2e}"),
    );
}

#[test]
fn criterion_13_determinism() {
    let cfg = ExperimentConfig { seed: Some(13), replicates: 50_000, p_tilde0: Some(1.2), ..Default::default() };
    let csv = |exec| cmd_mc_verify(&cfg, exec).unwrap().table.unwrap().to_csv_string().unwrap();
    let first = csv(Execution::Parallel);
    let same_in_process = first == csv(Execution::Parallel) && first == csv(Execution::Sequential);

    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_spenkf-lab");
    let files: Vec<Vec<u8>> = ["a.csv", "b.csv"]
        .iter()
        .map(|name| {
            let path = dir.path().join(name);
            let status = std::process::Command::new(bin).args(["mc-verify", "--seed", "13", "--out"]).arg(&path).status().unwrap();
            assert!(status.success());
            std::fs::read(path).unwrap()
        })
        .collect();
    let same_on_disk = files[0] == files[1];
    report(13, "repeated mc-verify with one seed is byte-identical", same_in_process && same_on_disk, format!("in process {same_in_process}, CLI files {same_on_disk}"));
}
