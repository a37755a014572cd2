//! Experiment runner on top of `spenkf-core`: JSON configs in, CSV tables
//! and pass/fail checks out.

pub mod commands;
pub mod config;
pub mod describe;
pub mod selftest;
pub mod table;

use anyhow::Result;
use spenkf_core::mc::Execution;

use crate::config::ExperimentConfig;
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Skf,
    Spenkf,
    McVerify,
    InflationTable,
    PoPenalty,
    Mv,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Skf => "skf",
            Command::Spenkf => "spenkf",
            Command::McVerify => "mc-verify",
            Command::InflationTable => "inflation-table",
            Command::PoPenalty => "po-penalty",
            Command::Mv => "mv",
            Command::Selftest => "selftest",
        }
    }

    /// Subcommands whose output depends on random draws and therefore
    /// insist on an explicit `--seed`.
    pub fn needs_seed(self) -> bool {
        matches!(self, Command::Spenkf | Command::McVerify | Command::PoPenalty | Command::Mv)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(label: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { label: label.into(), passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        if self.detail.is_empty() {
            format!("{tag}  {}", self.label)
        } else {
            format!("{tag}  {} ({})", self.label, self.detail)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub table: Option<Table>,
    pub checks: Vec<Check>,
}

impl CommandOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig, exec: Execution) -> Result<CommandOutput> {
    match cmd {
        Command::Skf => commands::cmd_skf(cfg),
        Command::Spenkf => commands::cmd_spenkf(cfg),
        Command::McVerify => commands::cmd_mc_verify(cfg, exec),
        Command::InflationTable => commands::cmd_inflation_table(cfg),
        Command::PoPenalty => commands::cmd_po_penalty(cfg, exec),
        Command::Mv => commands::cmd_mv(cfg, exec),
        Command::Selftest => Ok(CommandOutput { table: None, checks: selftest::run_selftest(exec)? }),
    }
}
