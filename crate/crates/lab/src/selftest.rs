//! A quick invariant sweep, meant to run in a few seconds on a fresh build.

use anyhow::Result;
use spenkf_core::discrepancy::{discrepancy_moments, discrepancy_monte_carlo, PerturbedInputs};
use spenkf_core::expint::{expint_scaled, expint_scaled_inverse_odds};
use spenkf_core::gamma_ratio::{ratio_mean, ratio_pdf, GammaRatioSpec};
use spenkf_core::mc::Execution;
use spenkf_core::propagators::{ModelSequence, ModelTrajectory};
use spenkf_core::skf::{skf_closed_form, skf_run};
use spenkf_core::spenkf::{inflation_schedule, theta_star};
use spenkf_core::RngSpec;
use spenkf_oracle::{integrate, scaled_expint, Tolerance};

use crate::Check;

const SEED: u64 = 0x5e1f;

fn expint_against_quadrature() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for nu in [1.5, 2.0, 4.0, 11.0, 50.0] {
        for z in [1e-3, 0.3, 1.0, 7.5, 40.0] {
            let got = expint_scaled(nu, z)?;
            let want = scaled_expint(nu, z).map_err(|e| anyhow::anyhow!("oracle: {e:?}"))?;
            worst = worst.max((got - want).abs() / want);
        }
    }
    Ok(Check::new("scaled E_nu matches quadrature to 1e-10", worst <= 1e-10, format!("max rel err {worst:.2e}")))
}

fn inverse_round_trip() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for alpha in [1.5, 4.0, 64.0] {
        for u in [1e-6, 0.01, 1.0, 100.0] {
            let z = expint_scaled_inverse_odds(alpha, u)?;
            let back = 1.0 / (alpha * expint_scaled(alpha + 1.0, z)?) - 1.0;
            worst = worst.max((back - u).abs() / u);
        }
    }
    Ok(Check::new("odds inverse round-trips to 1e-8", worst <= 1e-8, format!("max rel err {worst:.2e}")))
}

fn skf_forms_agree() -> Result<Check> {
    let model = ModelSequence::log_uniform(60, RngSpec::new(SEED, 1))?;
    let traj = ModelTrajectory::build(model, 0.7, 0.5, RngSpec::new(SEED, 2))?;
    let run = skf_run(&traj, 0.0, 2.0)?;
    let mut worst: f64 = 0.0;
    for (i, st) in run.iter().enumerate() {
        let cf = skf_closed_form(&traj, 0.0, 2.0, i)?;
        worst = worst
            .max((cf.var_analysis - st.var_analysis).abs() / st.var_analysis)
            .max((cf.mean_analysis - st.mean_analysis).abs() / st.mean_analysis.abs().max(1.0));
    }
    Ok(Check::new("filter closed form matches recursion to 1e-10", worst <= 1e-10, format!("max rel gap {worst:.2e}")))
}

fn ratio_mean_against_quadrature() -> Result<Check> {
    let spec = GammaRatioSpec::new(2.0, 0.5, 1.0, 3.0, 2.5, 1.5)?;
    let (lo, hi) = spec.support();
    let tol = Tolerance { abs: 0.0, rel: 1e-11, max_intervals: 4000 };
    let quad = |f: &dyn Fn(f64) -> f64| integrate(&f, lo, hi, tol).map(|e| e.value).map_err(|e| anyhow::anyhow!("oracle: {e:?}"));
    let mass = quad(&|y| ratio_pdf(&spec, y))?;
    let mean = quad(&|y| y * ratio_pdf(&spec, y))?;
    let err = (mean - ratio_mean(&spec)?).abs();
    let ok = (mass - 1.0).abs() <= 1e-9 && err <= 1e-9;
    Ok(Check::new("ratio density integrates to 1 and reproduces the mean", ok, format!("mass - 1 = {:.2e}, mean err {err:.2e}", mass - 1.0)))
}

fn discrepancy_checks(exec: Execution) -> Result<Vec<Check>> {
    let traj = ModelTrajectory::build(ModelSequence::constant(1.0, 10)?, 0.0, 1.0, RngSpec::new(SEED, 3))?;
    let inputs = PerturbedInputs::new(1.2, 0.3, 1.0, 0.0, 4.0)?;
    let spec = RngSpec::new(SEED, 4);
    let mc = discrepancy_monte_carlo(&traj, &inputs, 200_000, spec, exec)?;
    let mut worst: f64 = 0.0;
    for (i, s) in mc.iter().enumerate() {
        let a = discrepancy_moments(&traj, &inputs, i)?;
        worst = worst.max((s.dp.mean() - a.mean_dp).abs() / s.dp.se_mean()).max((s.dx.mean() - a.mean_dx).abs() / s.dx.se_mean());
    }
    let other = match exec {
        Execution::Sequential => Execution::Parallel,
        Execution::Parallel => Execution::Sequential,
    };
    let again = discrepancy_monte_carlo(&traj, &inputs, 200_000, spec, other)?;
    Ok(vec![
        Check::new("discrepancy means within 4 SE of Monte Carlo", worst <= 4.0, format!("max |gap|/SE = {worst:.2}")),
        Check::new("sequential and parallel Monte Carlo agree bit for bit", mc == again, String::new()),
    ])
}

fn inflation_bounds() -> Result<Check> {
    let traj = ModelTrajectory::build(ModelSequence::constant(1.0, 200)?, 0.0, 1.0, RngSpec::new(SEED, 5))?;
    let s = inflation_schedule(&traj, 5.0, 1.0, 0.0)?;
    let star = theta_star(5.0)?;
    let monotone = s.theta.windows(2).all(|w| w[0] <= w[1]);
    let bounded = s.theta.iter().all(|&t| (1.0..=star).contains(&t));
    let last = *s.theta.last().unwrap();
    let ok = star == 1.25 && monotone && bounded && star - last < 1e-2;
    Ok(Check::new("theta rises monotonically toward theta* = 1.25 at alpha = 5", ok, format!("theta_199 = {last:.6}")))
}

pub fn run_selftest(exec: Execution) -> Result<Vec<Check>> {
    let mut checks = vec![expint_against_quadrature()?, inverse_round_trip()?, skf_forms_agree()?, ratio_mean_against_quadrature()?];
    checks.extend(discrepancy_checks(exec)?);
    checks.push(inflation_bounds()?);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        let checks = run_selftest(Execution::Parallel).unwrap();
        for c in &checks {
            assert!(c.passed, "{}", c.line());
        }
    }
}
