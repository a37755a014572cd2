//! The exact scalar Kalman filter with direct observations (`h = 1`).

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mc::{run_blocks, Execution, Moments};
use crate::propagators::ModelTrajectory;
use crate::rng::RngSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkfState {
    pub step: usize,
    pub mean_forecast: f64,
    pub var_forecast: f64,
    pub mean_analysis: f64,
    pub var_analysis: f64,
    pub gain: f64,
}

/// Assimilate `y` into the forecast `(xf, pf)`.
pub fn skf_analysis(step: usize, xf: f64, pf: f64, y: f64, r: f64) -> SkfState {
    let gain = pf / (pf + r);
    SkfState {
        step,
        mean_forecast: xf,
        var_forecast: pf,
        mean_analysis: xf + gain * (y - xf),
        // (1 - k) p^f and r k agree algebraically; r k keeps the identity exact.
        var_analysis: r * gain,
        gain,
    }
}

/// Step 0: the prior `(x0, p0)` is the forecast.
pub fn skf_initial(x0: f64, p0: f64, y0: f64, r: f64) -> Result<SkfState> {
    check_variances(p0, r)?;
    Ok(skf_analysis(0, x0, p0, y0, r))
}

pub fn skf_step(prev: &SkfState, m: f64, y: f64, r: f64) -> Result<SkfState> {
    if m == 0.0 || !m.is_finite() {
        return Err(Error::invalid(format!("model multiplier m = {m} must be finite and nonzero")));
    }
    let xf = m * prev.mean_analysis;
    let pf = m * m * prev.var_analysis;
    Ok(skf_analysis(prev.step + 1, xf, pf, y, r))
}

/// Iterate the recursion over every step of the trajectory.
pub fn skf_run(traj: &ModelTrajectory, x0: f64, p0: f64) -> Result<Vec<SkfState>> {
    let r = traj.obs_variance();
    let ys = traj.observations();
    let mut out = Vec::with_capacity(traj.len());
    let mut state = skf_initial(x0, p0, ys[0], r)?;
    out.push(state);
    for (i, &m) in traj.model().values().iter().enumerate() {
        state = skf_step(&state, m, ys[i + 1], r)?;
        out.push(state);
    }
    Ok(out)
}

/// Analysis at step `i` from the propagator closed forms
/// `p_i^a = r M_i² p0 / (S_i p0 + r)` and
/// `x_i^a = M_i (B_i p0 + r x0) / (S_i p0 + r)`,
/// evaluated with everything divided through by `S_i`.
pub fn skf_closed_form(traj: &ModelTrajectory, x0: f64, p0: f64, i: usize) -> Result<SkfState> {
    traj.check_step(i)?;
    let r = traj.obs_variance();
    check_variances(p0, r)?;
    let (xa, pa, k) = closed_analysis(traj, x0, p0, i);
    let (xf, pf) = if i == 0 {
        (x0, p0)
    } else {
        let m = traj.multiplier(i - 1);
        let (xa_prev, pa_prev, _) = closed_analysis(traj, x0, p0, i - 1);
        (m * xa_prev, m * m * pa_prev)
    };
    Ok(SkfState { step: i, mean_forecast: xf, var_forecast: pf, mean_analysis: xa, var_analysis: pa, gain: k })
}

fn closed_analysis(traj: &ModelTrajectory, x0: f64, p0: f64, i: usize) -> (f64, f64, f64) {
    let r = traj.obs_variance();
    let q = traj.ratios(i);
    let denom = p0 + r * q.inv_s;
    let k = q.m2s * p0 / denom;
    let xa = traj.big_m()[i] * (q.b * p0 + r * q.inv_s * x0) / denom;
    (xa, r * k, k)
}

/// How the truth enters each Monte Carlo replicate of the filter error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthDraw {
    /// The truth starts at the trajectory's `x0^t` in every replicate. The
    /// error variance is then `r M_i² p0² S_i / (S_i p0 + r)²`, which tends
    /// to `p_i^a` only in the step limit.
    Fixed,
    /// The initial truth is drawn from the prior `N(x0, p0)`. The error
    /// variance then equals `p_i^a` at every step.
    FromPrior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMoments {
    pub mean_err: f64,
    pub se_mean: f64,
    pub var_err: f64,
    pub se_var: f64,
    pub replicates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMomentOptions {
    pub replicates: u64,
    pub rng: RngSpec,
    pub exec: Execution,
    pub truth: TruthDraw,
    /// When false, observations equal the truth exactly.
    pub observation_noise: bool,
}

/// Monte Carlo estimate of the mean and variance of `x_i^a - x_i^t`.
pub fn skf_error_moments(
    traj: &ModelTrajectory,
    x0: f64,
    p0: f64,
    i: usize,
    opts: ErrorMomentOptions,
) -> Result<ErrorMoments> {
    traj.check_step(i)?;
    let r = traj.obs_variance();
    check_variances(p0, r)?;
    if opts.replicates < 2 {
        return Err(Error::invalid("at least two replicates are required"));
    }
    let model = traj.model().values();
    let sd_r = if opts.observation_noise { r.sqrt() } else { 0.0 };
    let sd_p = p0.sqrt();
    let acc = run_blocks(opts.replicates, opts.rng, opts.exec, Moments::new, |rng, acc: &mut Moments| {
        let mut truth = match opts.truth {
            TruthDraw::Fixed => traj.x0_truth(),
            TruthDraw::FromPrior => x0 + sd_p * rng.sample::<f64, _>(StandardNormal),
        };
        let noise = |rng: &mut crate::rng::Rng| if sd_r > 0.0 { sd_r * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        let mut st = skf_analysis(0, x0, p0, truth + noise(rng), r);
        for (l, &m) in model.iter().enumerate().take(i) {
            truth *= m;
            let y = truth + noise(rng);
            st = skf_analysis(l + 1, m * st.mean_analysis, m * m * st.var_analysis, y, r);
        }
        acc.push(st.mean_analysis - truth);
    });
    Ok(ErrorMoments {
        mean_err: acc.mean(),
        se_mean: acc.se_mean(),
        var_err: acc.variance(),
        se_var: acc.se_variance(),
        replicates: acc.count(),
    })
}

fn check_variances(p0: f64, r: f64) -> Result<()> {
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(Error::invalid(format!("p0 = {p0} must be positive and finite")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("r = {r} must be positive and finite")));
    }
    Ok(())
}
