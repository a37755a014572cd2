//! Column documentation printed by `--describe`. Each subcommand builds its
//! CSV header from these lists, so the two cannot drift apart.

use crate::Command;

pub type Columns = &'static [(&'static str, &'static str)];

pub const SKF: Columns = &[
    ("step", "analysis index i (step 0 assimilates y_0 against the prior)"),
    ("M_ratio", "M_i²/S_i with M_i = m_0⋯m_{i-1} and S_i = Σ_{l≤i} M_l²"),
    ("truth", "x_i^t = M_i x_0^t"),
    ("observation", "y_i = x_i^t + ε_i, ε_i ~ N(0, r)"),
    ("skf_mean_forecast", "x_i^f = m_{i-1} x_{i-1}^a (x_0 at step 0)"),
    ("skf_var_forecast", "p_i^f = m_{i-1}² p_{i-1}^a (p_0 at step 0)"),
    ("skf_mean", "x_i^a = x_i^f + k_i (y_i - x_i^f) from the recursion"),
    ("skf_var", "p_i^a = r k_i from the recursion"),
    ("skf_gain", "k_i = p_i^f / (p_i^f + r)"),
    ("closed_mean", "x_i^a = M_i (B_i p_0 + r x_0) / (S_i p_0 + r), B_i = Σ_{l≤i} M_l y_l"),
    ("closed_var", "p_i^a = r M_i² p_0 / (S_i p_0 + r)"),
];

pub const SPENKF: Columns = &[
    ("step", "analysis index i"),
    ("M_ratio", "M_i²/S_i"),
    ("skf_mean", "exact filter analysis mean x_i^a from (x_0, p_0)"),
    ("skf_var", "exact filter analysis variance p_i^a"),
    ("ens_mean", "ensemble analysis mean x̂_i^a"),
    ("ens_var", "ensemble sampled analysis variance p̂_i^a = (a·a)/N"),
    ("ens_gain", "k̂_i = p̂_i^f / (p̂_i^f + r)"),
    ("dp", "Δp_i = p̂_i^a - p_i^a"),
    ("dx", "Δx_i = x̂_i^a - x_i^a"),
    ("phi", "variance factor applied to the forecast at step i (1 when none)"),
    ("psi", "mean shift applied to the forecast at step i (0 when none)"),
];

pub const MC_VERIFY: Columns = &[
    ("step", "analysis index i"),
    ("M_ratio", "M_i²/S_i"),
    ("skf_mean", "exact filter analysis mean x_i^a"),
    ("skf_var", "exact filter analysis variance p_i^a"),
    ("E_dp", "analytic E[Δp_i] = α r (M²/S) c/(p_0+c) [𝔈_{α+1}(z) - (p_0/p̃_0) 𝔈_α(z)], c = r/S_i, z = α c/p̃_0"),
    ("E_dx", "analytic E[Δx_i], two-order bracket in 𝔈_α, 𝔈_{α+1}"),
    ("Var_dp", "analytic E[Δp_i²] - E[Δp_i]², four-order bracket 𝔈_{α-1}…𝔈_{α+2}"),
    ("Var_dx", "analytic E[Δx_i²] - E[Δx_i]², four-order bracket 𝔈_{α-1}…𝔈_{α+2}"),
    ("emp_E_dp", "Monte Carlo mean of Δp_i over p̂_0 ~ Gamma(α, rate α/p̃_0)"),
    ("se_E_dp", "standard error of emp_E_dp"),
    ("emp_E_dx", "Monte Carlo mean of Δx_i"),
    ("se_E_dx", "standard error of emp_E_dx"),
    ("emp_Var_dp", "Monte Carlo variance of Δp_i (divisor n-1)"),
    ("se_Var_dp", "standard error of emp_Var_dp, sqrt((μ_4 - s⁴)/n)"),
    ("emp_Var_dx", "Monte Carlo variance of Δx_i"),
    ("se_Var_dx", "standard error of emp_Var_dx"),
    ("theta", "θ_i = [(S_i p_0/(α r)) 𝔈_{α+1}^{-1}(S_i p_0/(α(S_i p_0 + r)))]^{-1}"),
    ("phi", "φ_i = θ_i (θ_{i-1} p_0 + r/S_{i-1}) / (θ_{i-1} (θ_i p_0 + r/S_{i-1})), φ_0 = θ_0"),
    ("psi", "ψ_i = m_{i-1} (M_{i-1}/S_{i-1}) (B_{i-1}/S_{i-1} - x̃_0)(θ_i - θ_{i-1}) p_0 r / (d_i d_{i-1}), d_k = θ_k p_0 + r/S_{i-1}, ψ_0 = 0"),
];

pub const INFLATION_TABLE: Columns = &[
    ("step", "analysis index i"),
    ("log_S", "ln S_i"),
    ("M_ratio", "M_i²/S_i"),
    ("theta", "step-wise inflation factor θ_i (nondecreasing in i)"),
    ("theta_star", "θ* = α/(α-1)"),
    ("phi", "sequential variance factor φ_i"),
    ("psi", "sequential mean shift ψ_i"),
];

pub const PO_PENALTY: Columns = &[
    ("alpha", "ensemble shape α = N/2"),
    ("step", "analysis index i"),
    ("E_K4", "E[K_i⁴] for K_i = M_i² p̂_0/(S_i p̂_0 + r), closed form in 𝔈_α"),
    ("obs_spread", "E[(R - r)²] = r²/α"),
    ("penalty", "E[K_i⁴] E[(R - r)²], extra analysis variance from perturbed observations"),
    ("emp_penalty", "Monte Carlo Var[K²(R - r)]"),
    ("se_penalty", "standard error of emp_penalty"),
    ("mean_update", "Monte Carlo E[rK + K²(R - r)]"),
    ("se_update", "standard error of mean_update"),
    ("analytic_mean", "r E[K_i], the square-root filter's mean analysis variance"),
    ("covariance", "Monte Carlo Cov(rK, K²(R - r)), zero by independence"),
    ("se_covariance", "standard error of covariance"),
];

pub const MV: Columns = &[
    ("step", "analysis index i"),
    ("component", "basis component j"),
    ("mean_basis", "ensemble analysis mean x̄_{i,j} in the basis"),
    ("var_basis", "sampled analysis variance p̂_{i,j}^a in the basis"),
    ("mean", "state mean component j of Z x̄_i"),
    ("cov_diag", "state covariance diagonal j of Z diag(p̂_i^a) Zᵀ"),
    ("skf_mean_basis", "exact scalar filter mean for component j"),
    ("skf_var_basis", "exact scalar filter variance for component j"),
    ("truth_basis", "x_{i,j}^t, the truth in the basis"),
];

pub fn columns(cmd: Command) -> Columns {
    match cmd {
        Command::Skf => SKF,
        Command::Spenkf => SPENKF,
        Command::McVerify => MC_VERIFY,
        Command::InflationTable => INFLATION_TABLE,
        Command::PoPenalty => PO_PENALTY,
        Command::Mv => MV,
        Command::Selftest => &[],
    }
}

pub fn header(cols: Columns) -> Vec<&'static str> {
    cols.iter().map(|(name, _)| *name).collect()
}

/// Human-readable column list.
pub fn render(cmd: Command) -> String {
    let cols = columns(cmd);
    if cols.is_empty() {
        return "selftest writes no CSV; it prints one PASS/FAIL line per check and exits nonzero on any failure.\n".into();
    }
    let width = cols.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    cols.iter().map(|(n, d)| format!("{n:<width$}  {d}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_are_unique_and_documented() {
        for cmd in [Command::Skf, Command::Spenkf, Command::McVerify, Command::InflationTable, Command::PoPenalty, Command::Mv] {
            let h = header(columns(cmd));
            let mut sorted = h.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), h.len(), "{}", cmd.name());
            assert!(columns(cmd).iter().all(|(_, d)| !d.is_empty()));
            assert_eq!(render(cmd).lines().count(), h.len());
        }
        assert!(render(Command::Selftest).contains("PASS/FAIL"));
    }
}
