//! One function per subcommand. Each returns its table plus the checks it
//! performed; the binary decides what to print and the exit code.

use anyhow::{bail, ensure, Context, Result};
use nalgebra::{DMatrix, DVector};
use spenkf_core::discrepancy::{
    discrepancy_moments, discrepancy_monte_carlo, po_mean_identity_check, po_observation_spread, po_variance_penalty,
    PerturbedInputs, PoCheckOptions,
};
use spenkf_core::mc::{Execution, Moments};
use spenkf_core::mvspenkf::{mv_inflation_schedule, mv_spenkf_run, DiagonalizableModel, MvTrajectory};
use spenkf_core::propagators::ModelTrajectory;
use spenkf_core::skf::{skf_closed_form, skf_run};
use spenkf_core::spenkf::{inflation_schedule, sample_initial_ensemble, spenkf_run, theta_star, Inflation};

use crate::config::{streams, ExperimentConfig, InflationMode};
use crate::describe;
use crate::table::{Cell, Table};
use crate::{Check, CommandOutput};

/// Gaps are judged against this many standard errors.
pub const SE_MULTIPLE: f64 = 4.0;

fn trajectory(cfg: &ExperimentConfig) -> Result<ModelTrajectory> {
    ModelTrajectory::build(cfg.model_sequence()?, cfg.x0_truth, cfg.r, cfg.stream(streams::OBSERVATIONS))
        .context("building the trajectory")
}

fn output(cols: describe::Columns) -> Table {
    Table::new(describe::header(cols))
}

pub fn cmd_skf(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    cfg.validate(false)?;
    let traj = trajectory(cfg)?;
    let run = skf_run(&traj, cfg.x0, cfg.p0)?;
    let mut table = output(describe::SKF);
    let mut worst: f64 = 0.0;
    for (i, st) in run.iter().enumerate() {
        let cf = skf_closed_form(&traj, cfg.x0, cfg.p0, i)?;
        let scale_x = st.mean_analysis.abs().max(traj.truth()[i].abs()).max(1.0);
        worst = worst
            .max((cf.mean_analysis - st.mean_analysis).abs() / scale_x)
            .max((cf.var_analysis - st.var_analysis).abs() / st.var_analysis);
        table.push(vec![
            i.into(),
            traj.ratios(i).m2s.into(),
            traj.truth()[i].into(),
            traj.observations()[i].into(),
            st.mean_forecast.into(),
            st.var_forecast.into(),
            st.mean_analysis.into(),
            st.var_analysis.into(),
            st.gain.into(),
            cf.mean_analysis.into(),
            cf.var_analysis.into(),
        ])?;
    }
    let checks = vec![Check::new("closed form matches recursion", worst <= 1e-10, format!("max relative gap {worst:.3e}"))];
    Ok(CommandOutput { table: Some(table), checks })
}

pub fn cmd_spenkf(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    cfg.validate(true)?;
    let traj = trajectory(cfg)?;
    let alpha = cfg.alpha();
    let exact = skf_run(&traj, cfg.x0, cfg.p0)?;
    let prior = sample_initial_ensemble(cfg.ensemble_size, cfg.p0, cfg.x0, &mut cfg.stream(streams::ENSEMBLE).rng())?;
    let n = traj.len();
    let (run, phi, psi) = match cfg.inflation {
        InflationMode::None => (spenkf_run(&traj, &prior, Inflation::None)?, vec![1.0; n], vec![0.0; n]),
        InflationMode::InitialTheta => {
            let star = theta_star(alpha)?;
            let mut phi = vec![1.0; n];
            phi[0] = star;
            (spenkf_run(&traj, &prior, Inflation::Initial(star))?, phi, vec![0.0; n])
        }
        InflationMode::Sequential => {
            let schedule = inflation_schedule(&traj, alpha, cfg.p0, prior.mean)?;
            let f = schedule.factors_for(prior.sampled_var, prior.mean);
            (spenkf_run(&traj, &prior, Inflation::Sequential(&schedule))?, f.phi, f.psi)
        }
    };
    let mut table = output(describe::SPENKF);
    let mut finite = true;
    for (i, (st, ex)) in run.iter().zip(&exact).enumerate() {
        let row = vec![
            i.into(),
            traj.ratios(i).m2s.into(),
            ex.mean_analysis.into(),
            ex.var_analysis.into(),
            st.mean.into(),
            st.sampled_var.into(),
            st.gain.into(),
            (st.sampled_var - ex.var_analysis).into(),
            (st.mean - ex.mean_analysis).into(),
            phi[i].into(),
            psi[i].into(),
        ];
        finite &= row.iter().all(|c| matches!(c, Cell::Int(_)) || matches!(c, Cell::Float(v) if v.is_finite()));
        table.push(row)?;
    }
    let checks = vec![Check::new("all entries finite", finite, String::new())];
    Ok(CommandOutput { table: Some(table), checks })
}

struct GapTracker {
    label: &'static str,
    worst: f64,
    failing: Vec<usize>,
}

impl GapTracker {
    fn new(label: &'static str) -> Self {
        GapTracker { label, worst: 0.0, failing: Vec::new() }
    }

    fn observe(&mut self, step: usize, gap: f64, se: f64) {
        let score = if gap == 0.0 { 0.0 } else { gap.abs() / se };
        if score.is_nan() || score > SE_MULTIPLE {
            self.failing.push(step);
        }
        if score > self.worst || score.is_nan() {
            self.worst = score;
        }
    }

    fn check(self) -> Check {
        let detail = if self.failing.is_empty() {
            format!("max |gap|/SE = {:.2}", self.worst)
        } else {
            format!("max |gap|/SE = {:.2}; failing steps {:?}", self.worst, self.failing)
        };
        Check::new(self.label, self.failing.is_empty(), detail)
    }
}

pub fn cmd_mc_verify(cfg: &ExperimentConfig, exec: Execution) -> Result<CommandOutput> {
    cfg.validate(true)?;
    ensure!(cfg.replicates >= 2, "config field `replicates`: mc-verify needs at least 2");
    let traj = trajectory(cfg)?;
    let alpha = cfg.alpha();
    let inputs = PerturbedInputs::new(cfg.p_tilde0(), cfg.x_tilde0(), cfg.p0, cfg.x0, alpha)?;
    let exact = skf_run(&traj, cfg.x0, cfg.p0)?;
    let schedule = inflation_schedule(&traj, alpha, cfg.p0, cfg.x_tilde0())?;
    let mc = discrepancy_monte_carlo(&traj, &inputs, cfg.replicates, cfg.stream(streams::MONTE_CARLO), exec)?;
    let mut trackers = [
        GapTracker::new("E[dp] within 4 SE"),
        GapTracker::new("E[dx] within 4 SE"),
        GapTracker::new("Var[dp] within 4 SE"),
        GapTracker::new("Var[dx] within 4 SE"),
    ];
    let mut table = output(describe::MC_VERIFY);
    for (i, (s, ex)) in mc.iter().zip(&exact).enumerate() {
        let a = discrepancy_moments(&traj, &inputs, i)?;
        let gaps: [(f64, &Moments, bool); 4] =
            [(a.mean_dp, &s.dp, true), (a.mean_dx, &s.dx, true), (a.var_dp, &s.dp, false), (a.var_dx, &s.dx, false)];
        for (t, (analytic, m, is_mean)) in trackers.iter_mut().zip(gaps) {
            let (emp, se) = if is_mean { (m.mean(), m.se_mean()) } else { (m.variance(), m.se_variance()) };
            t.observe(i, emp - analytic, se);
        }
        table.push(vec![
            i.into(),
            traj.ratios(i).m2s.into(),
            ex.mean_analysis.into(),
            ex.var_analysis.into(),
            a.mean_dp.into(),
            a.mean_dx.into(),
            a.var_dp.into(),
            a.var_dx.into(),
            s.dp.mean().into(),
            s.dp.se_mean().into(),
            s.dx.mean().into(),
            s.dx.se_mean().into(),
            s.dp.variance().into(),
            s.dp.se_variance().into(),
            s.dx.variance().into(),
            s.dx.se_variance().into(),
            schedule.theta[i].into(),
            schedule.phi[i].into(),
            schedule.psi[i].into(),
        ])?;
    }
    let checks = trackers.into_iter().map(GapTracker::check).collect();
    Ok(CommandOutput { table: Some(table), checks })
}

pub fn cmd_inflation_table(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    cfg.validate(true)?;
    let traj = trajectory(cfg)?;
    let alpha = cfg.alpha();
    let s = inflation_schedule(&traj, alpha, cfg.p0, cfg.x_tilde0())?;
    let mut table = output(describe::INFLATION_TABLE);
    for i in 0..traj.len() {
        table.push(vec![
            i.into(),
            traj.log_s()[i].into(),
            traj.ratios(i).m2s.into(),
            s.theta[i].into(),
            s.theta_star.into(),
            s.phi[i].into(),
            s.psi[i].into(),
        ])?;
    }
    let monotone = s.theta.windows(2).all(|w| w[0] <= w[1]);
    let bounded = s.theta.iter().all(|&t| (1.0..=s.theta_star).contains(&t));
    let phi_ok = s.phi.iter().all(|&p| (1.0..=s.theta_star).contains(&p));
    let checks = vec![
        Check::new("theta nondecreasing", monotone, String::new()),
        Check::new("1 <= theta <= theta*", bounded, format!("theta* = {}", s.theta_star)),
        Check::new("1 <= phi <= theta*", phi_ok, String::new()),
    ];
    Ok(CommandOutput { table: Some(table), checks })
}

pub fn cmd_po_penalty(cfg: &ExperimentConfig, exec: Execution) -> Result<CommandOutput> {
    cfg.validate(false)?;
    ensure!(cfg.replicates >= 100_000, "config field `replicates`: po-penalty needs at least 1e5, got {}", cfg.replicates);
    ensure!(!cfg.po_alphas.is_empty(), "config field `po_alphas`: empty");
    let traj = trajectory(cfg)?;
    let step = cfg.po_step.unwrap_or(traj.len() - 1);
    traj.check_step(step).context("config field `po_step`")?;
    let mut table = output(describe::PO_PENALTY);
    let mut checks = Vec::new();
    let root = cfg.stream(streams::PERTURBED_OBS);
    let mut penalties = Vec::new();
    for (k, &alpha) in cfg.po_alphas.iter().enumerate() {
        ensure!(alpha > 1.0, "config field `po_alphas[{k}]`: alpha = {alpha} must exceed 1");
        let penalty = po_variance_penalty(&traj, cfg.p0, alpha, step)?;
        let spread = po_observation_spread(cfg.r, alpha);
        let opts = PoCheckOptions { replicates: cfg.replicates, rng: root.fork(k as u64), exec, perturb_observations: cfg.perturbed_obs };
        let rep = po_mean_identity_check(&traj, cfg.p0, alpha, step, opts)?;
        penalties.push(penalty);
        table.push(vec![
            alpha.into(),
            step.into(),
            (penalty / spread).into(),
            spread.into(),
            penalty.into(),
            rep.empirical_penalty.into(),
            rep.se_penalty.into(),
            rep.mean_update.into(),
            rep.se_update.into(),
            rep.analytic_mean.into(),
            rep.covariance.into(),
            rep.se_covariance.into(),
        ])?;
        checks.push(Check::new(
            format!("alpha = {alpha}: mean identity, zero covariance, penalty within 4 SE"),
            rep.passed(),
            format!(
                "mean z = {:.2}, cov z = {:.2}, penalty z = {:.2}",
                (rep.mean_update - rep.analytic_mean) / rep.se_update,
                rep.covariance / rep.se_covariance,
                if rep.se_penalty > 0.0 { (rep.empirical_penalty - rep.analytic_penalty) / rep.se_penalty } else { 0.0 }
            ),
        ));
    }
    Ok(CommandOutput { table: Some(table), checks })
}

fn mv_model(cfg: &ExperimentConfig) -> Result<DiagonalizableModel> {
    let mv = &cfg.mv;
    let n = mv.z.len();
    ensure!(n > 0 && mv.z.iter().all(|r| r.len() == n), "config field `mv.z`: must be a square matrix");
    for (name, v) in [("m", &mv.m), ("p0", &mv.p0), ("r", &mv.r), ("v0", &mv.v0), ("truth0", &mv.truth0)] {
        ensure!(v.len() == n, "config field `mv.{name}`: {} entries, Z is {n}x{n}", v.len());
    }
    let z = DMatrix::from_fn(n, n, |i, j| mv.z[i][j]);
    let diag = DVector::from_vec(mv.m.clone());
    let m_seq = vec![diag; cfg.steps];
    DiagonalizableModel::new(z, &m_seq, DVector::from_vec(mv.p0.clone()), DVector::from_vec(mv.r.clone())).context("config field `mv`")
}

pub fn cmd_mv(cfg: &ExperimentConfig, exec: Execution) -> Result<CommandOutput> {
    cfg.validate(true)?;
    let model = mv_model(cfg)?;
    let traj = MvTrajectory::build(&model, &DVector::from_vec(cfg.mv.truth0.clone()), cfg.stream(streams::MV_OBSERVATIONS))?;
    let v0 = DVector::from_vec(cfg.mv.v0.clone());
    let schedules = match cfg.inflation {
        InflationMode::None => None,
        InflationMode::Sequential => Some(mv_inflation_schedule(&model, &traj, cfg.ensemble_size, &v0)?),
        InflationMode::InitialTheta => bail!("config field `inflation`: mv supports `none` and `sequential`"),
    };
    let run = mv_spenkf_run(&model, &traj, &v0, cfg.ensemble_size, cfg.stream(streams::MV_ENSEMBLE), schedules.as_deref(), exec)?;
    let x0 = model.to_basis(&v0);
    let exact: Vec<_> = (0..model.dim()).map(|j| skf_run(traj.component(j), x0[j], model.p0()[j])).collect::<Result<_, _>>()?;
    let mut table = output(describe::MV);
    for (i, st) in run.steps.iter().enumerate() {
        for (j, ex) in exact.iter().enumerate() {
            table.push(vec![
                i.into(),
                j.into(),
                st.mean_basis[j].into(),
                st.var_basis[j].into(),
                st.mean[j].into(),
                st.covariance[(j, j)].into(),
                ex[i].mean_analysis.into(),
                ex[i].var_analysis.into(),
                traj.component(j).truth()[i].into(),
            ])?;
        }
    }
    let mapped = run.steps.iter().all(|s| (model.to_state(&s.mean_basis) - &s.mean).norm() <= 1e-12 * (1.0 + s.mean.norm()));
    Ok(CommandOutput { table: Some(table), checks: vec![Check::new("state mean equals Z times basis mean", mapped, String::new())] })
}
