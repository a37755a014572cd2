//! Moments of the gap between the ensemble filter started from perturbed
//! inputs and the exact filter.
//!
//! The ensemble's initial sampled variance `p̂0` is `Gamma(α, rate α/p̃0)`
//! and its initial mean is `x̃0`. By the closed-form gain, step `i` of the
//! ensemble filter depends on the ensemble only through `p̂0`:
//!
//! `Δp_i = p̂_i^a - p_i^a`, `Δx_i = x̂_i^a - x_i^a`,
//!
//! so every moment is a Gamma-ratio moment in `z = α r / (S_i p̃0)`. All
//! formulas are written with the ratios `M²/S`, `M/S`, `1/S`, `B/S` so that
//! nothing overflows when `S_i` does.

use rand::Rng as _;
use rand_distr::Gamma;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::expint::expint_scaled_dd;
use crate::gamma_ratio::{ratio_fourth_moment, ratio_mean, GammaRatioSpec};
use crate::mc::{run_blocks, CoMoments, Execution, Merge, Moments};
use crate::propagators::{ModelTrajectory, StepRatios};
use crate::rng::RngSpec;

/// Exact and perturbed initial conditions plus the ensemble shape `α`.
///
/// The observation variance is taken from the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedInputs {
    pub p_tilde0: f64,
    pub x_tilde0: f64,
    pub p0: f64,
    pub x0: f64,
    pub alpha: f64,
}

impl PerturbedInputs {
    pub fn new(p_tilde0: f64, x_tilde0: f64, p0: f64, x0: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("p_tilde0", p_tilde0), ("p0", p0)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} = {v} must be positive and finite")));
            }
        }
        if !x_tilde0.is_finite() || !x0.is_finite() {
            return Err(Error::invalid("initial means must be finite"));
        }
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha = {alpha} must exceed 1 (N >= 3)")));
        }
        Ok(PerturbedInputs { p_tilde0, x_tilde0, p0, x0, alpha })
    }

    /// Unperturbed inputs: `p̃0 = p0`, `x̃0 = x0`.
    pub fn exact(p0: f64, x0: f64, alpha: f64) -> Result<Self> {
        Self::new(p0, x0, p0, x0, alpha)
    }

    /// The sampled-variance law of the initial ensemble.
    pub fn initial_variance_law(&self) -> Gamma<f64> {
        Gamma::new(self.alpha, self.p_tilde0 / self.alpha).expect("validated shape and scale")
    }
}

/// Analytic first and second moments of `Δp_i` and `Δx_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyMoments {
    pub mean_dp: f64,
    pub second_dp: f64,
    pub var_dp: f64,
    pub mean_dx: f64,
    pub second_dx: f64,
    pub var_dx: f64,
}

/// All four moments at step `i`, sharing one set of `𝔈` evaluations.
pub fn discrepancy_moments(traj: &ModelTrajectory, inputs: &PerturbedInputs, i: usize) -> Result<DiscrepancyMoments> {
    traj.check_step(i)?;
    let q = traj.ratios(i);
    if q.inv_s == 0.0 {
        // S_i beyond double range: both filters trust the data completely.
        return Ok(DiscrepancyMoments { mean_dp: 0.0, second_dp: 0.0, var_dp: 0.0, mean_dx: 0.0, second_dx: 0.0, var_dx: 0.0 });
    }
    let r = traj.obs_variance();
    let al = Dd::new(inputs.alpha);
    let (p0, pt) = (Dd::new(inputs.p0), Dd::new(inputs.p_tilde0));
    let (x0, xt, b) = (Dd::new(inputs.x0), Dd::new(inputs.x_tilde0), Dd::new(q.b));
    let c = Dd::new(r) * q.inv_s;
    let z = al * c / pt;
    let e = |shift: f64| expint_scaled_dd(al + shift, z);
    let (em1, e0, e1, e2) = (e(-1.0)?, e(0.0)?, e(1.0)?, e(2.0)?);
    let den = p0 + c;

    // Δp.
    let scale_p = Dd::new(r) * q.m2s * c / den;
    let mean_dp = al * scale_p * (e1 - p0 / pt * e0);
    let bracket_p2 = al * p0 * p0 / (pt * pt) * em1 - al * p0 * (2.0 * pt + p0) / (pt * pt) * e0
        + ((al + 1.0) * pt + 2.0 * al * p0) / pt * e1
        - (al + 1.0) * e2;
    let second_dp = al * scale_p * scale_p * bracket_p2;

    // Δx.
    let rms = Dd::new(r) * q.ms;
    let mean_dx = al * rms / den * ((c * (xt - x0) - (b - xt) * p0) / pt * e0 + (b - x0) * e1);
    let dt = (b - xt) * p0 + c * (x0 - xt);
    let bracket_x2 = al * dt * dt * em1
        + al * dt * (-(p0 + 2.0 * pt) * b + p0 * xt + 2.0 * pt * x0 + c * (xt - x0)) * e0
        + pt * (b - x0)
            * ((2.0 * al * p0 + (al + 1.0) * pt) * b - (2.0 * al * xt * p0 + (al + 1.0) * x0 * pt)
                + 2.0 * al * c * (x0 - xt))
            * e1
        - (al + 1.0) * pt * pt * (b - x0) * (b - x0) * e2;
    // α r² (M/S)² / (p̃² (p0 + c)²), with (M/S)² = (M²/S)(1/S).
    let pref_x = al * Dd::new(r) * r * q.m2s * q.inv_s / (pt * pt * den * den);
    let second_dx = pref_x * bracket_x2;

    Ok(DiscrepancyMoments {
        mean_dp: mean_dp.to_f64(),
        second_dp: second_dp.to_f64(),
        var_dp: (second_dp - mean_dp * mean_dp).to_f64(),
        mean_dx: mean_dx.to_f64(),
        second_dx: second_dx.to_f64(),
        var_dx: (second_dx - mean_dx * mean_dx).to_f64(),
    })
}

/// `E[Δp_i]`.
pub fn expected_dp(traj: &ModelTrajectory, inputs: &PerturbedInputs, i: usize) -> Result<f64> {
    discrepancy_moments(traj, inputs, i).map(|m| m.mean_dp)
}

/// `E[Δp_i²]`.
pub fn second_moment_dp(traj: &ModelTrajectory, inputs: &PerturbedInputs, i: usize) -> Result<f64> {
    discrepancy_moments(traj, inputs, i).map(|m| m.second_dp)
}

/// `E[Δx_i]`.
pub fn expected_dx(traj: &ModelTrajectory, inputs: &PerturbedInputs, i: usize) -> Result<f64> {
    discrepancy_moments(traj, inputs, i).map(|m| m.mean_dx)
}

/// `E[Δx_i²]`.
pub fn second_moment_dx(traj: &ModelTrajectory, inputs: &PerturbedInputs, i: usize) -> Result<f64> {
    discrepancy_moments(traj, inputs, i).map(|m| m.second_dx)
}

/// `(Δp_i, Δx_i)` for one realized initial sampled variance `p̂0`.
///
/// Uses `Δp = r (M²/S) c (p̂0 - p0) / ((p̂0 + c)(p0 + c))` and
/// `Δx = r (M/S) [(x̃0 - b)/(p̂0 + c) - (x0 - b)/(p0 + c)]` with
/// `c = r/S`, `b = B/S`; neither subtracts two analyses.
pub fn sampled_discrepancy(q: &StepRatios, r: f64, inputs: &PerturbedInputs, p_hat0: f64) -> (f64, f64) {
    let c = r * q.inv_s;
    let (dh, d0) = (p_hat0 + c, inputs.p0 + c);
    let dp = r * q.m2s * c * (p_hat0 - inputs.p0) / (dh * d0);
    let dx = r * q.ms * ((inputs.x_tilde0 - q.b) / dh - (inputs.x0 - q.b) / d0);
    (dp, dx)
}

/// Empirical moments of `Δp_i` and `Δx_i` at one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepMoments {
    pub dp: Moments,
    pub dx: Moments,
}

impl Merge for StepMoments {
    fn merge(&mut self, other: Self) {
        self.dp.merge(other.dp);
        self.dx.merge(other.dx);
    }
}

/// Monte Carlo over `p̂0` draws; one entry per trajectory step.
pub fn discrepancy_monte_carlo(
    traj: &ModelTrajectory,
    inputs: &PerturbedInputs,
    replicates: u64,
    rng: RngSpec,
    exec: Execution,
) -> Result<Vec<StepMoments>> {
    if replicates < 2 {
        return Err(Error::invalid("at least two replicates are required"));
    }
    let r = traj.obs_variance();
    let ratios: Vec<StepRatios> = (0..traj.len()).map(|i| traj.ratios(i)).collect();
    let law = inputs.initial_variance_law();
    let acc = run_blocks(
        replicates,
        rng,
        exec,
        || vec![StepMoments::default(); ratios.len()],
        |rng, acc: &mut Vec<StepMoments>| {
            let p_hat0 = rng.sample(law);
            for (q, slot) in ratios.iter().zip(acc.iter_mut()) {
                let (dp, dx) = sampled_discrepancy(q, r, inputs, p_hat0);
                slot.dp.push(dp);
                slot.dx.push(dx);
            }
        },
    );
    Ok(acc)
}

/// `E[(R - r)²] = r²/α` for the Gamma observation-variance surrogate.
pub fn po_observation_spread(r: f64, alpha: f64) -> f64 {
    r * r / alpha
}

/// The gain `K_i = M_i² p̂0 / (S_i p̂0 + r)` as a Gamma-ratio variable.
/// `None` when `S_i` overflows and the gain is the constant `M_i²/S_i`.
fn gain_spec(q: &StepRatios, r: f64, p0: f64, alpha: f64) -> Result<Option<GammaRatioSpec>> {
    if q.inv_s == 0.0 {
        return Ok(None);
    }
    GammaRatioSpec::new(q.m2s, 0.0, 1.0, r * q.inv_s, alpha, p0).map(Some)
}

/// `E[K_i⁴] E[(R - r)²]`, the variance that perturbed observations add on
/// top of the square-root filter's analysis variance.
pub fn po_variance_penalty(traj: &ModelTrajectory, p0: f64, alpha: f64, i: usize) -> Result<f64> {
    traj.check_step(i)?;
    let r = traj.obs_variance();
    let q = traj.ratios(i);
    let k4 = match gain_spec(&q, r, p0, alpha)? {
        Some(spec) => ratio_fourth_moment(&spec)?,
        None => q.m2s.powi(4),
    };
    Ok(k4 * po_observation_spread(r, alpha))
}

#[derive(Debug, Clone, Copy)]
pub struct PoCheckOptions {
    pub replicates: u64,
    pub rng: RngSpec,
    pub exec: Execution,
    /// Draw `R ~ Gamma(α, rate α/r)`; when false `R ≡ r`.
    pub perturb_observations: bool,
}

/// Monte Carlo evidence that perturbed observations leave the mean analysis
/// variance unchanged and only add [`po_variance_penalty`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoReport {
    pub replicates: u64,
    /// Empirical `E[rK + K²(R - r)]` and its standard error.
    pub mean_update: f64,
    pub se_update: f64,
    /// Analytic `r E[K]`.
    pub analytic_mean: f64,
    /// Empirical `E[K²(R - r)]` and its standard error.
    pub mean_penalty_term: f64,
    pub se_penalty_term: f64,
    /// Empirical `Cov(rK, K²(R - r))` and its standard error.
    pub covariance: f64,
    pub se_covariance: f64,
    /// Empirical `Var[K²(R - r)]` against [`po_variance_penalty`] (zero when
    /// observations are not perturbed).
    pub empirical_penalty: f64,
    pub se_penalty: f64,
    pub analytic_penalty: f64,
}

impl PoReport {
    fn within(gap: f64, se: f64) -> bool {
        gap.abs() <= 4.0 * se || gap == 0.0
    }

    pub fn mean_ok(&self) -> bool {
        Self::within(self.mean_update - self.analytic_mean, self.se_update)
            && Self::within(self.mean_penalty_term, self.se_penalty_term)
    }

    pub fn covariance_ok(&self) -> bool {
        Self::within(self.covariance, self.se_covariance)
    }

    pub fn penalty_ok(&self) -> bool {
        Self::within(self.empirical_penalty - self.analytic_penalty, self.se_penalty)
    }

    pub fn passed(&self) -> bool {
        self.mean_ok() && self.covariance_ok() && self.penalty_ok()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PoAcc {
    update: Moments,
    pair: CoMoments,
}

impl Merge for PoAcc {
    fn merge(&mut self, other: Self) {
        self.update.merge(other.update);
        self.pair.merge(other.pair);
    }
}

pub fn po_mean_identity_check(
    traj: &ModelTrajectory,
    p0: f64,
    alpha: f64,
    i: usize,
    opts: PoCheckOptions,
) -> Result<PoReport> {
    traj.check_step(i)?;
    if opts.replicates < 100_000 {
        return Err(Error::invalid(format!("{} replicates; at least 1e5 are required", opts.replicates)));
    }
    let r = traj.obs_variance();
    let q = traj.ratios(i);
    let spec = gain_spec(&q, r, p0, alpha)?;
    let analytic_mean = r * match &spec {
        Some(s) => ratio_mean(s)?,
        None => q.m2s,
    };
    // With R ≡ r the update carries no extra variance at all.
    let analytic_penalty = if opts.perturb_observations { po_variance_penalty(traj, p0, alpha, i)? } else { 0.0 };
    let k_law = Gamma::new(alpha, p0 / alpha).map_err(|e| Error::invalid(e.to_string()))?;
    let r_law = Gamma::new(alpha, r / alpha).map_err(|e| Error::invalid(e.to_string()))?;
    let c = r * q.inv_s;
    let acc = run_blocks(opts.replicates, opts.rng, opts.exec, PoAcc::default, |rng, acc: &mut PoAcc| {
        let p_hat = rng.sample(k_law);
        let k = q.m2s * p_hat / (p_hat + c);
        let r_hat = if opts.perturb_observations { rng.sample(r_law) } else { r };
        let extra = k * k * (r_hat - r);
        acc.update.push(r * k + extra);
        acc.pair.push(r * k, extra);
    });
    let extra = acc.pair.y;
    Ok(PoReport {
        replicates: acc.update.count(),
        mean_update: acc.update.mean(),
        se_update: acc.update.se_mean(),
        analytic_mean,
        mean_penalty_term: extra.mean(),
        se_penalty_term: extra.se_mean(),
        covariance: acc.pair.covariance(),
        se_covariance: acc.pair.se_covariance(),
        empirical_penalty: extra.variance(),
        se_penalty: extra.se_variance(),
        analytic_penalty,
    })
}
