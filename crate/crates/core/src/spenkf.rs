//! The scalar pedagogical ensemble Kalman filter and its inflation schedule.
//!
//! Anomalies are mean-decoupled and the sampled variance uses divisor `N`,
//! not `N - 1`: `p̂ = (a·a)/N`. With `a_j ~ N(0, p0)` this makes
//! `p̂_0 ~ Gamma(N/2, rate N/(2 p0))` exactly, which is what all of the
//! analytic results rely on.
//!
//! The analysis is a square-root update: the mean moves with the sampled gain
//! `k̂ = p̂^f/(p̂^f + r)` and the anomalies are scaled by `sqrt(p̂^a/p̂^f)`.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::expint::expint_scaled_inverse_odds;
use crate::propagators::ModelTrajectory;
use crate::rng::Rng;
use crate::skf::{skf_analysis, SkfState};

/// Sampled variances below this are treated as a collapsed ensemble.
pub const MIN_SAMPLED_VARIANCE: f64 = 1e-300;

/// Below this odds ratio `r / (S p0)` the inflation factor equals `θ*` to
/// double precision.
const THETA_SATURATION_ODDS: f64 = 1e-250;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub step: usize,
    pub mean: f64,
    pub anomalies: Vec<f64>,
    /// `(a·a)/N` for the anomalies held here.
    pub sampled_var: f64,
    /// Gain of the analysis that produced this state; zero for a forecast or
    /// prior that has not been analyzed.
    pub gain: f64,
    pub alpha: f64,
}

impl EnsembleState {
    pub fn from_anomalies(step: usize, mean: f64, anomalies: Vec<f64>) -> Result<Self> {
        if anomalies.len() < 3 {
            return Err(Error::invalid(format!(
                "ensemble size N = {} must be at least 3 (N = 2 makes the inflation factor unbounded)",
                anomalies.len()
            )));
        }
        let sampled_var = sampled_variance(&anomalies);
        check_sampled(sampled_var)?;
        let alpha = anomalies.len() as f64 / 2.0;
        Ok(EnsembleState { step, mean, anomalies, sampled_var, gain: 0.0, alpha })
    }

    pub fn size(&self) -> usize {
        self.anomalies.len()
    }

    /// Model propagation to the next step.
    pub fn forecast(&self, m: f64) -> Result<Self> {
        if m == 0.0 || !m.is_finite() {
            return Err(Error::invalid(format!("model multiplier m = {m} must be finite and nonzero")));
        }
        let anomalies: Vec<f64> = self.anomalies.iter().map(|a| m * a).collect();
        let sampled_var = sampled_variance(&anomalies);
        check_sampled(sampled_var)?;
        Ok(EnsembleState { step: self.step + 1, mean: m * self.mean, anomalies, sampled_var, gain: 0.0, alpha: self.alpha })
    }

    /// Multiply the sampled variance by `phi` (anomalies by `sqrt(phi)`).
    pub fn inflate(&mut self, phi: f64) -> Result<()> {
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(Error::invalid(format!("inflation factor {phi} must be positive and finite")));
        }
        let s = phi.sqrt();
        self.anomalies.iter_mut().for_each(|a| *a *= s);
        self.sampled_var = sampled_variance(&self.anomalies);
        check_sampled(self.sampled_var)
    }

    /// Add `psi` to the mean.
    pub fn shift(&mut self, psi: f64) {
        self.mean += psi;
    }

    /// Rescale the anomalies so the sampled variance equals `p`.
    pub fn rescaled_to(&self, p: f64) -> Result<Self> {
        let mut out = self.clone();
        out.inflate(p / self.sampled_var)?;
        Ok(out)
    }

    /// Square-root analysis against observation `y` with variance `r`.
    pub fn analyze(&self, y: f64, r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("r = {r} must be positive and finite")));
        }
        check_sampled(self.sampled_var)?;
        let pf = self.sampled_var;
        let gain = pf / (pf + r);
        // p̂^a / p̂^f = 1 - k̂ = r / (p̂^f + r)
        let s = (r / (pf + r)).sqrt();
        let anomalies: Vec<f64> = self.anomalies.iter().map(|a| s * a).collect();
        let sampled_var = sampled_variance(&anomalies);
        check_sampled(sampled_var)?;
        Ok(EnsembleState {
            step: self.step,
            mean: self.mean + gain * (y - self.mean),
            anomalies,
            sampled_var,
            gain,
            alpha: self.alpha,
        })
    }
}

pub fn sampled_variance(anomalies: &[f64]) -> f64 {
    anomalies.iter().map(|a| a * a).sum::<f64>() / anomalies.len() as f64
}

fn check_sampled(p: f64) -> Result<()> {
    if !(p >= MIN_SAMPLED_VARIANCE) || !p.is_finite() {
        return Err(Error::DegenerateVariance(p));
    }
    Ok(())
}

/// Prior ensemble: mean `x0`, anomalies i.i.d. `N(0, p0)`.
pub fn sample_initial_ensemble(n: usize, p0: f64, x0: f64, rng: &mut Rng) -> Result<EnsembleState> {
    if n < 3 {
        return Err(Error::invalid(format!("ensemble size N = {n} must be at least 3")));
    }
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(Error::invalid(format!("p0 = {p0} must be positive and finite")));
    }
    let sd = p0.sqrt();
    let anomalies = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    EnsembleState::from_anomalies(0, x0, anomalies)
}

/// Forecast with `m`, then analyze `y`.
pub fn spenkf_step(prev: &EnsembleState, m: f64, y: f64, r: f64) -> Result<EnsembleState> {
    prev.forecast(m)?.analyze(y, r)
}

/// How inflation enters a run.
#[derive(Debug, Clone, Copy)]
pub enum Inflation<'a> {
    None,
    /// Multiply the prior variance once by this factor.
    Initial(f64),
    /// Apply `φ_i` and `ψ_i` after every forecast (and `φ_0 = θ_0` to the
    /// prior). The factors are evaluated with the prior's own sampled
    /// variance and mean as the base.
    Sequential(&'a InflationSchedule),
}

/// Run the ensemble filter across the whole trajectory, returning the
/// analysis at every step.
pub fn spenkf_run(traj: &ModelTrajectory, prior: &EnsembleState, inflation: Inflation<'_>) -> Result<Vec<EnsembleState>> {
    let r = traj.obs_variance();
    let ys = traj.observations();
    let factors = match inflation {
        Inflation::Sequential(s) => {
            if s.len() != traj.len() {
                return Err(Error::Dimension(format!("schedule has {} steps, trajectory {}", s.len(), traj.len())));
            }
            Some(s.factors_for(prior.sampled_var, prior.mean))
        }
        _ => None,
    };
    let mut forecast = prior.clone();
    match inflation {
        Inflation::Initial(theta) => forecast.inflate(theta)?,
        Inflation::Sequential(_) => {
            let f = factors.as_ref().expect("computed above");
            forecast.inflate(f.phi[0])?;
        }
        Inflation::None => {}
    }
    let mut out = Vec::with_capacity(traj.len());
    let mut state = forecast.analyze(ys[0], r)?;
    out.push(state.clone());
    for i in 1..traj.len() {
        let mut f = state.forecast(traj.multiplier(i - 1))?;
        if let Some(fac) = &factors {
            f.inflate(fac.phi[i])?;
            f.shift(fac.psi[i]);
        }
        state = f.analyze(ys[i], r)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// `θ* = α/(α-1)`, the inflation that removes the variance bias as `S → ∞`.
pub fn theta_star(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha = {alpha} must exceed 1 (N >= 3)")));
    }
    Ok(alpha / (alpha - 1.0))
}

/// Step-wise inflation factor
/// `θ_i = [ (S_i p0/(α r)) 𝔈_{α+1}^{-1}( S_i p0 / (α (S_i p0 + r)) ) ]^{-1}`.
pub fn theta_step(alpha: f64, s_i: f64, p0: f64, r: f64) -> Result<f64> {
    if !(s_i >= 1.0) || !(p0 > 0.0) || !(r > 0.0) {
        return Err(Error::invalid(format!("theta_step needs S >= 1, p0 > 0, r > 0 (got {s_i}, {p0}, {r})")));
    }
    theta_from_odds(alpha, r / (s_i * p0))
}

/// `θ` as a function of the odds ratio `u = r / (S p0)`.
///
/// The inverse argument is `1/(α(1+u))`; solving through the complement
/// keeps full precision when `u` is small and `θ` sits next to `θ*`.
pub fn theta_from_odds(alpha: f64, u: f64) -> Result<f64> {
    let star = theta_star(alpha)?;
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::invalid(format!("odds ratio {u} must be finite and nonnegative")));
    }
    if u < THETA_SATURATION_ODDS {
        return Ok(star);
    }
    let z = expint_scaled_inverse_odds(alpha, u)?;
    // The bracket (α-1)u <= z <= αu maps to 1 <= θ <= θ*; clamp rounding.
    Ok((alpha * u / z).clamp(1.0, star))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InflationFactors {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InflationSchedule {
    pub alpha: f64,
    pub theta_star: f64,
    pub theta: Vec<f64>,
    /// `φ_i` evaluated with the exact `p0` and `x̃0` given at construction.
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub p0: f64,
    pub r: f64,
    pub x_tilde0: f64,
    multipliers: Vec<f64>,
    ms: Vec<f64>,
    inv_s: Vec<f64>,
    b: Vec<f64>,
}

impl InflationSchedule {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `φ_i`, `ψ_i` for a run whose initial variance is `base_var` and whose
    /// initial mean is `x_tilde0`. With `base_var = p0` these are the stored
    /// `phi`/`psi`; an ensemble passes its realized `p̂_0` so that sequential
    /// application reproduces the `θ_i p̂_0`-initialized run exactly.
    pub fn factors_for(&self, base_var: f64, x_tilde0: f64) -> InflationFactors {
        let n = self.len();
        let mut phi = Vec::with_capacity(n);
        let mut psi = Vec::with_capacity(n);
        phi.push(self.theta[0]);
        psi.push(0.0);
        for i in 0..n - 1 {
            let (t0, t1) = (self.theta[i], self.theta[i + 1]);
            let c = self.r * self.inv_s[i];
            let d0 = t0 * base_var + c;
            let d1 = t1 * base_var + c;
            // φ = θ_{i+1} d0 / (θ_i d1), rewritten as 1 + c Δθ / (θ_i d1) so that
            // it cannot round below 1.
            phi.push((1.0 + c * (t1 - t0) / (t0 * d1)).min(self.theta_star));
            let m_next_over_s = self.multipliers[i] * self.ms[i];
            psi.push(m_next_over_s * (self.b[i] - x_tilde0) * (t1 - t0) * base_var * self.r / (d1 * d0));
        }
        InflationFactors { phi, psi }
    }
}

/// θ, φ and ψ for every step of a trajectory.
///
/// θ is computed step by step, then passed through a running maximum: it is
/// monotone in `S_i` analytically, and the maximum only removes last-ulp
/// inversions between nearly equal `S` values.
pub fn inflation_schedule(traj: &ModelTrajectory, alpha: f64, p0: f64, x_tilde0: f64) -> Result<InflationSchedule> {
    let star = theta_star(alpha)?;
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(Error::invalid(format!("p0 = {p0} must be positive and finite")));
    }
    let r = traj.obs_variance();
    let n = traj.len();
    let mut theta = Vec::with_capacity(n);
    let (mut ms, mut inv_s, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut running: f64 = 1.0;
    for i in 0..n {
        let q = traj.ratios(i);
        let t = theta_from_odds(alpha, r * q.inv_s / p0)?;
        running = running.max(t).min(star);
        theta.push(running);
        ms.push(q.ms);
        inv_s.push(q.inv_s);
        b.push(q.b);
    }
    let mut schedule = InflationSchedule {
        alpha,
        theta_star: star,
        theta,
        phi: Vec::new(),
        psi: Vec::new(),
        p0,
        r,
        x_tilde0,
        multipliers: traj.model().values().to_vec(),
        ms,
        inv_s,
        b,
    };
    let f = schedule.factors_for(p0, x_tilde0);
    schedule.phi = f.phi;
    schedule.psi = f.psi;
    Ok(schedule)
}

/// The deterministic filter (exact variance arithmetic) started from
/// `(x_tilde0, base_var)` with the schedule's factors applied after every
/// forecast. Equals the run started from `θ_i base_var` at step `i`.
pub fn inflated_skf_run(
    traj: &ModelTrajectory,
    x_tilde0: f64,
    base_var: f64,
    schedule: &InflationSchedule,
) -> Result<Vec<SkfState>> {
    if schedule.len() != traj.len() {
        return Err(Error::Dimension(format!("schedule has {} steps, trajectory {}", schedule.len(), traj.len())));
    }
    let r = traj.obs_variance();
    let ys = traj.observations();
    let f = schedule.factors_for(base_var, x_tilde0);
    let mut out = Vec::with_capacity(traj.len());
    let mut st = skf_analysis(0, x_tilde0, f.phi[0] * base_var, ys[0], r);
    out.push(st);
    for i in 1..traj.len() {
        let m = traj.multiplier(i - 1);
        let xf = m * st.mean_analysis + f.psi[i];
        let pf = f.phi[i] * m * m * st.var_analysis;
        st = skf_analysis(i, xf, pf, ys[i], r);
        out.push(st);
    }
    Ok(out)
}
