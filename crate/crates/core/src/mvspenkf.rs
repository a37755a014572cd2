//! Multivariate ensemble filter for models that are diagonal in a fixed
//! basis: `L_i = Z M_i Z^{-1}` with `M_i = diag(m_{i,1}, …, m_{i,n})`.
//!
//! With diagonal prior and observation covariances in that basis, and the
//! sampled forecast covariance masked to its diagonal (`I ∘ A Aᵀ/N`), the
//! filter splits into `n` independent scalar filters. This module is a thin
//! vectorization of the scalar code plus the two basis changes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mc::Execution;
use crate::propagators::{ModelSequence, ModelTrajectory};
use crate::rng::RngSpec;
use crate::spenkf::{inflation_schedule, sample_initial_ensemble, spenkf_run, EnsembleState, Inflation, InflationSchedule};

/// Largest accepted condition number of `Z`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalizableModel {
    z: DMatrix<f64>,
    z_inv: DMatrix<f64>,
    /// `components[j]` holds `m_{0,j}, m_{1,j}, …`.
    components: Vec<ModelSequence>,
    p0: DVector<f64>,
    r: DVector<f64>,
}

impl DiagonalizableModel {
    /// `m_seq[i]` is the diagonal of `M_i`.
    pub fn new(z: DMatrix<f64>, m_seq: &[DVector<f64>], p0_diag: DVector<f64>, r_diag: DVector<f64>) -> Result<Self> {
        let n = z.nrows();
        if n == 0 || z.ncols() != n {
            return Err(Error::Dimension(format!("Z is {}x{}, expected square and nonempty", z.nrows(), z.ncols())));
        }
        if p0_diag.len() != n || r_diag.len() != n {
            return Err(Error::Dimension(format!("P0 has {}, R has {} entries; state dimension is {n}", p0_diag.len(), r_diag.len())));
        }
        if m_seq.is_empty() {
            return Err(Error::invalid("model needs at least one step"));
        }
        if let Some(bad) = m_seq.iter().find(|m| m.len() != n) {
            return Err(Error::Dimension(format!("model step has {} entries, expected {n}", bad.len())));
        }
        if p0_diag.iter().chain(r_diag.iter()).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("diagonal variances must be positive and finite"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("Z has non-finite entries"));
        }
        let sv = z.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned(cond));
        }
        let z_inv = z.clone().try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))?;
        let components = (0..n)
            .map(|j| ModelSequence::new(m_seq.iter().map(|m| m[j]).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiagonalizableModel { z, z_inv, components, p0: p0_diag, r: r_diag })
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    /// Number of model steps (the filter sees one more analysis).
    pub fn steps(&self) -> usize {
        self.components[0].len()
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn z_inv(&self) -> &DMatrix<f64> {
        &self.z_inv
    }

    pub fn p0(&self) -> &DVector<f64> {
        &self.p0
    }

    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn component(&self, j: usize) -> &ModelSequence {
        &self.components[j]
    }

    /// `diag(M_i)`.
    pub fn diagonal(&self, i: usize) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.components.iter().map(|c| c.values()[i]))
    }

    /// `L_i = Z M_i Z^{-1}`.
    pub fn propagator(&self, i: usize) -> DMatrix<f64> {
        &self.z * DMatrix::from_diagonal(&self.diagonal(i)) * &self.z_inv
    }

    /// `L_i ⋯ L_0 = Z (M_i ⋯ M_0) Z^{-1}`.
    pub fn cumulative_propagator(&self, i: usize) -> DMatrix<f64> {
        let prod = DVector::from_iterator(self.dim(), self.components.iter().map(|c| c.values()[..=i].iter().product::<f64>()));
        &self.z * DMatrix::from_diagonal(&prod) * &self.z_inv
    }

    /// `Z v`: basis coordinates to state.
    pub fn to_state(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.z * x
    }

    /// `Z^{-1} v`: state to basis coordinates.
    pub fn to_basis(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.z_inv * v
    }

    fn check_vector(&self, v: &DVector<f64>, what: &str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!("{what} has {} entries, expected {}", v.len(), self.dim())));
        }
        Ok(())
    }
}

/// Truth and observations, held per basis component.
///
/// Observations in the basis are `y_i ~ N(x_i^t, R)`, i.e. state-space
/// observations `w_i = Z y_i ~ N(v_i^t, Z R Zᵀ)`.
#[derive(Debug, Clone)]
pub struct MvTrajectory {
    components: Vec<ModelTrajectory>,
}

impl MvTrajectory {
    /// Component `j` draws its observation noise from `spec.fork(j)`.
    pub fn build(model: &DiagonalizableModel, truth0: &DVector<f64>, spec: RngSpec) -> Result<Self> {
        model.check_vector(truth0, "initial truth")?;
        let x0t = model.to_basis(truth0);
        let components = (0..model.dim())
            .map(|j| ModelTrajectory::build(model.component(j).clone(), x0t[j], model.r[j], spec.fork(j as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MvTrajectory { components })
    }

    pub fn component(&self, j: usize) -> &ModelTrajectory {
        &self.components[j]
    }

    /// Number of analyses.
    pub fn len(&self) -> usize {
        self.components[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Observation `y_i` in basis coordinates.
    pub fn observation_basis(&self, i: usize) -> DVector<f64> {
        DVector::from_iterator(self.components.len(), self.components.iter().map(|c| c.observations()[i]))
    }

    /// Truth `x_i^t` in basis coordinates.
    pub fn truth_basis(&self, i: usize) -> DVector<f64> {
        DVector::from_iterator(self.components.len(), self.components.iter().map(|c| c.truth()[i]))
    }
}

/// Analysis at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct MvStep {
    pub mean_basis: DVector<f64>,
    /// Diagonal of the sampled analysis covariance in the basis.
    pub var_basis: DVector<f64>,
    /// `Z x̄`.
    pub mean: DVector<f64>,
    /// `Z diag(var_basis) Zᵀ`.
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvRun {
    /// Prior ensembles in the basis, one per component.
    pub priors: Vec<EnsembleState>,
    pub steps: Vec<MvStep>,
}

/// Per-component ensembles with mean `Z^{-1} v0` and anomalies
/// `N(0, p_{0,j})`; component `j` draws from `spec.fork(j)`.
pub fn mv_initial_ensembles(model: &DiagonalizableModel, v0: &DVector<f64>, n_ens: usize, spec: RngSpec) -> Result<Vec<EnsembleState>> {
    model.check_vector(v0, "prior mean")?;
    let x0 = model.to_basis(v0);
    (0..model.dim())
        .map(|j| sample_initial_ensemble(n_ens, model.p0[j], x0[j], &mut spec.fork(j as u64).rng()))
        .collect()
}

/// Run the masked multivariate filter. `schedules`, when given, holds one
/// inflation schedule per component (see [`mv_inflation_schedule`]).
pub fn mv_spenkf_run(
    model: &DiagonalizableModel,
    traj: &MvTrajectory,
    v0: &DVector<f64>,
    n_ens: usize,
    spec: RngSpec,
    schedules: Option<&[InflationSchedule]>,
    exec: Execution,
) -> Result<MvRun> {
    let n = model.dim();
    if traj.components.len() != n {
        return Err(Error::Dimension(format!("trajectory has {} components, model {n}", traj.components.len())));
    }
    if let Some(s) = schedules {
        if s.len() != n {
            return Err(Error::Dimension(format!("{} schedules for {n} components", s.len())));
        }
    }
    let priors = mv_initial_ensembles(model, v0, n_ens, spec)?;
    let run_one = |j: usize| {
        let inflation = match schedules {
            Some(s) => Inflation::Sequential(&s[j]),
            None => Inflation::None,
        };
        spenkf_run(&traj.components[j], &priors[j], inflation)
    };
    let per_component: Vec<Vec<EnsembleState>> = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(run_one).collect::<Result<_>>()?
        }
        _ => (0..n).map(run_one).collect::<Result<_>>()?,
    };
    let steps = (0..traj.len())
        .map(|i| {
            let mean_basis = DVector::from_iterator(n, per_component.iter().map(|c| c[i].mean));
            let var_basis = DVector::from_iterator(n, per_component.iter().map(|c| c[i].sampled_var));
            let mean = model.to_state(&mean_basis);
            let covariance = &model.z * DMatrix::from_diagonal(&var_basis) * model.z.transpose();
            MvStep { mean_basis, var_basis, mean, covariance }
        })
        .collect();
    Ok(MvRun { priors, steps })
}

/// One scalar inflation schedule per basis component, with `α = N/2` and
/// `x̃_0 = Z^{-1} v0`.
pub fn mv_inflation_schedule(
    model: &DiagonalizableModel,
    traj: &MvTrajectory,
    n_ens: usize,
    v_tilde0: &DVector<f64>,
) -> Result<Vec<InflationSchedule>> {
    model.check_vector(v_tilde0, "perturbed prior mean")?;
    if n_ens < 3 {
        return Err(Error::invalid(format!("ensemble size N = {n_ens} must be at least 3")));
    }
    let alpha = n_ens as f64 / 2.0;
    let xt = model.to_basis(v_tilde0);
    (0..model.dim())
        .map(|j| inflation_schedule(&traj.components[j], alpha, model.p0[j], xt[j]))
        .collect()
}

/// `I ∘ C`: keep only the diagonal.
pub fn diagonal_mask(c: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&c.diagonal())
}

/// `A Aᵀ / N` for an `n × N` anomaly matrix.
pub fn sampled_covariance(anomalies: &DMatrix<f64>) -> DMatrix<f64> {
    anomalies * anomalies.transpose() / anomalies.ncols() as f64
}
