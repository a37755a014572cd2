//! Model products and cumulative sums that every closed form consumes.
//!
//! For a model `m_0, ..., m_{n-1}` the trajectory has steps `0..=n`:
//!
//! * `M_0 = 1`, `M_{i+1} = m_i M_i`
//! * `S_i = Σ_{l<=i} M_l²`
//! * `B_i = Σ_{l<=i} M_l y_l`
//!
//! With `|m| > 1` over long horizons the raw sums overflow, so each step also
//! carries a [`StepRatios`] record (`M²/S`, `M/S`, `1/S`, `B/S`) built from a
//! log-domain ledger. Downstream code only ever needs these ratios.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{Rng, RngSpec};

/// Per-step multipliers `m_i`, all nonzero and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSequence {
    values: Vec<f64>,
}

impl ModelSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("model sequence must be nonempty"));
        }
        if let Some((i, m)) = values.iter().enumerate().find(|(_, m)| **m == 0.0 || !m.is_finite()) {
            return Err(Error::invalid(format!("model multiplier m_{i} = {m} must be finite and nonzero")));
        }
        Ok(ModelSequence { values })
    }

    pub fn constant(m: f64, steps: usize) -> Result<Self> {
        Self::new(vec![m; steps])
    }

    /// i.i.d. multipliers with `ln|m| ~ U(-ln 2, ln 2)` and a fair random sign.
    pub fn log_uniform(steps: usize, spec: RngSpec) -> Result<Self> {
        let mut rng = spec.rng();
        let ln2 = std::f64::consts::LN_2;
        let values = (0..steps)
            .map(|_| {
                let mag = rng.random_range(-ln2..=ln2).exp();
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Overflow-safe ratios at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRatios {
    /// `M_i² / S_i`
    pub m2s: f64,
    /// `M_i / S_i`
    pub ms: f64,
    /// `1 / S_i`
    pub inv_s: f64,
    /// `B_i / S_i`
    pub b: f64,
}

#[derive(Debug, Clone)]
pub struct ModelTrajectory {
    model: ModelSequence,
    r: f64,
    x0_truth: f64,
    m: Vec<f64>,
    s: Vec<f64>,
    b: Vec<f64>,
    log_abs_m: Vec<f64>,
    sign_m: Vec<f64>,
    log_s: Vec<f64>,
    truth: Vec<f64>,
    observations: Vec<f64>,
    ratios: Vec<StepRatios>,
}

impl ModelTrajectory {
    /// Build a trajectory with observations `y_i ~ N(x_i^t, r)`.
    pub fn build(model: ModelSequence, x0_truth: f64, r: f64, spec: RngSpec) -> Result<Self> {
        let mut rng = spec.rng();
        Self::build_with(model, x0_truth, r, &mut rng)
    }

    pub fn build_with(model: ModelSequence, x0_truth: f64, r: f64, rng: &mut Rng) -> Result<Self> {
        let sd = checked_sd(r)?;
        let n = model.len() + 1;
        let noise: Vec<f64> = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        Self::from_noise(model, x0_truth, r, &noise)
    }

    /// Observations equal to the truth.
    pub fn noiseless(model: ModelSequence, x0_truth: f64, r: f64) -> Result<Self> {
        checked_sd(r)?;
        let noise = vec![0.0; model.len() + 1];
        Self::from_noise(model, x0_truth, r, &noise)
    }

    /// Observations `y_i = x_i^t + noise_i`.
    pub fn from_noise(model: ModelSequence, x0_truth: f64, r: f64, noise: &[f64]) -> Result<Self> {
        checked_sd(r)?;
        let n = model.len() + 1;
        if noise.len() != n {
            return Err(Error::Dimension(format!("expected {n} noise values, got {}", noise.len())));
        }
        let mut traj = Self::propagate(model, x0_truth, r);
        traj.observe(noise);
        Ok(traj)
    }

    /// Same model and truth, fresh observation noise.
    pub fn resample(&self, rng: &mut Rng) -> Self {
        let sd = self.r.sqrt();
        let noise: Vec<f64> = (0..self.len()).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut next = self.clone();
        next.observe(&noise);
        next
    }

    fn propagate(model: ModelSequence, x0_truth: f64, r: f64) -> Self {
        let n = model.len() + 1;
        let mut m = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        let mut log_abs_m = Vec::with_capacity(n);
        let mut sign_m = Vec::with_capacity(n);
        let mut log_s = Vec::with_capacity(n);
        m.push(1.0);
        s.push(1.0);
        log_abs_m.push(0.0);
        sign_m.push(1.0);
        log_s.push(0.0);
        for (i, &mi) in model.values().iter().enumerate() {
            let mm = m[i] * mi;
            m.push(mm);
            s.push(s[i] + mm * mm);
            let lm = log_abs_m[i] + mi.abs().ln();
            log_abs_m.push(lm);
            sign_m.push(sign_m[i] * mi.signum());
            log_s.push(log_add_exp(log_s[i], 2.0 * lm));
        }
        ModelTrajectory {
            model,
            r,
            x0_truth,
            m,
            s,
            b: Vec::new(),
            log_abs_m,
            sign_m,
            log_s,
            truth: Vec::new(),
            observations: Vec::new(),
            ratios: Vec::new(),
        }
    }

    fn observe(&mut self, noise: &[f64]) {
        let n = self.len();
        self.truth.clear();
        self.truth.push(self.x0_truth);
        for &mi in self.model.values() {
            let last = *self.truth.last().expect("nonempty");
            self.truth.push(mi * last);
        }
        self.observations = self.truth.iter().zip(noise).map(|(t, e)| t + e).collect();
        self.b.clear();
        self.ratios.clear();
        let mut big_b = 0.0;
        let mut b_rec = 0.0;
        for i in 0..n {
            big_b += self.m[i] * self.observations[i];
            self.b.push(big_b);
            let direct = self.m[i].is_finite() && self.s[i].is_finite() && big_b.is_finite();
            let (m2s, ms, inv_s) = if direct {
                let si = self.s[i];
                (self.m[i] * self.m[i] / si, self.m[i] / si, 1.0 / si)
            } else {
                let lm = self.log_abs_m[i];
                let ls = self.log_s[i];
                ((2.0 * lm - ls).exp(), self.sign_m[i] * (lm - ls).exp(), (-ls).exp())
            };
            // B/S by recursion: b_i = b_{i-1} S_{i-1}/S_i + (M_i/S_i) y_i, with
            // (M_i/S_i) y_i = (M_i²/S_i) x0^t + (M_i/S_i) noise_i so that an
            // overflowing truth never enters.
            let shrink = if i == 0 { 0.0 } else { (self.log_s[i - 1] - self.log_s[i]).exp() };
            b_rec = b_rec * shrink + m2s * self.x0_truth + ms * noise[i];
            let b = if direct { big_b / self.s[i] } else { b_rec };
            self.ratios.push(StepRatios { m2s, ms, inv_s, b });
        }
    }

    /// Number of steps, `model.len() + 1`.
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn model(&self) -> &ModelSequence {
        &self.model
    }

    pub fn obs_variance(&self) -> f64 {
        self.r
    }

    pub fn x0_truth(&self) -> f64 {
        self.x0_truth
    }

    pub fn check_step(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::StepOutOfRange { index: i, len: self.len() })
        }
    }

    /// `M_i`; may be infinite for long unstable models.
    pub fn big_m(&self) -> &[f64] {
        &self.m
    }

    /// `S_i`; may be infinite for long unstable models.
    pub fn big_s(&self) -> &[f64] {
        &self.s
    }

    /// `B_i`; may be infinite for long unstable models.
    pub fn big_b(&self) -> &[f64] {
        &self.b
    }

    pub fn log_abs_m(&self) -> &[f64] {
        &self.log_abs_m
    }

    pub fn log_s(&self) -> &[f64] {
        &self.log_s
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn ratios(&self, i: usize) -> StepRatios {
        self.ratios[i]
    }

    /// `m_i`, the multiplier taking step `i` to `i + 1`.
    pub fn multiplier(&self, i: usize) -> f64 {
        self.model.values()[i]
    }

    /// `M_i (B_i - c S_i) / S_i²`.
    pub fn doubly_normalized_deviation(&self, c: f64, i: usize) -> Result<f64> {
        self.check_step(i)?;
        let q = self.ratios[i];
        Ok(q.ms * (q.b - c))
    }
}

fn checked_sd(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("observation variance r = {r} must be positive and finite")));
    }
    Ok(r.sqrt())
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
