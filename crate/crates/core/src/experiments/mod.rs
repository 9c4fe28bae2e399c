//! Batch experiments. A command reads one config, fans out over the corpus,
//! writes CSV/JSON reports in a fixed order and returns a list of checks.
//! Report bodies are deterministic; wall-clock data goes only to
//! `<command>.metadata.json`.

mod commands;
pub mod config;
pub mod corpus;
pub mod suites;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use config::{CoefficientSpec, ExperimentConfig, GridSpec, Overrides, Params, TimeSpec, Tolerances};

use crate::error::{Error, Result};
use crate::operator::DiscreteOperator;
use crate::semigroup::TimeGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Assemble,
    Functional,
    Decompose,
    Validate,
    Bmo,
    Carleson,
    Riesz,
    Equivalence,
    Oracle,
    Report,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Assemble,
        Command::Functional,
        Command::Decompose,
        Command::Validate,
        Command::Bmo,
        Command::Carleson,
        Command::Riesz,
        Command::Equivalence,
        Command::Oracle,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Assemble => "assemble",
            Command::Functional => "functional",
            Command::Decompose => "decompose",
            Command::Validate => "validate",
            Command::Bmo => "bmo",
            Command::Carleson => "carleson",
            Command::Riesz => "riesz",
            Command::Equivalence => "equivalence",
            Command::Oracle => "oracle",
            Command::Report => "report",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| Error::Config(format!("unknown command {s:?}")))
    }
}

/// One asserted quantity. `measured` is `None` for degenerate inputs (a
/// ratio with a vanishing denominator), which are reported but not failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = !measured.is_nan() && lower.is_none_or(|l| measured >= l) && upper.is_none_or(|u| measured <= u);
        Self { name: name.into(), measured: Some(measured), lower, upper, pass }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, upper: f64) -> Self {
        Self::new(name, measured, None, Some(upper))
    }

    pub fn at_least(name: impl Into<String>, measured: f64, lower: f64) -> Self {
        Self::new(name, measured, Some(lower), None)
    }

    pub fn within(name: impl Into<String>, measured: f64, lower: f64, upper: f64) -> Self {
        Self::new(name, measured, Some(lower), Some(upper))
    }

    /// A bound on an optional ratio; `None` is degenerate.
    pub fn ratio_at_most(name: impl Into<String>, measured: Option<f64>, upper: f64) -> Self {
        match measured {
            Some(m) => Self::at_most(name, m, upper),
            None => Self { name: name.into(), measured: None, lower: None, upper: Some(upper), pass: true },
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.measured.is_none()
    }

    /// `PASS name measured [lower, upper]`.
    pub fn line(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
        let measured = self.measured.map_or_else(|| "degenerate".to_string(), |x| format!("{x:.6e}"));
        format!(
            "{} {} {} [{}, {}]",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            measured,
            fmt(self.lower),
            fmt(self.upper)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub command: Command,
    pub checks: Vec<Check>,
    /// Files written, relative to the output directory, in write order.
    pub files: Vec<String>,
    pub output_dir: PathBuf,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            2
        }
    }
}

/// 3 for configuration and input errors, 4 for numerical failures.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::KrylovNonConvergence { .. }
        | Error::QuadratureNonConvergence { .. }
        | Error::Singular(_)
        | Error::Numerical(_)
        | Error::Degenerate(_) => 4,
        _ => 3,
    }
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) => o.exit_code(),
        Err(e) => error_exit_code(e),
    }
}

/// A configured run: operator, time grid and the report directory.
pub struct Lab {
    pub config: ExperimentConfig,
    pub op: DiscreteOperator,
    pub times: TimeGrid,
    dir: PathBuf,
    files: Vec<String>,
}

impl Lab {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let op = config.operator()?;
        let times = config.times.build(&op.grid)?;
        Ok(Self { config: config.clone(), op, times, dir: config.output_dir(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.write(name, &body)
    }
}

/// Runs one command and writes its reports plus `<command>.json` (the
/// checks) and `<command>.metadata.json` (timestamp and config).
pub fn run(command: Command, config: &ExperimentConfig) -> Result<Outcome> {
    let started = SystemTime::now();
    let mut lab = Lab::new(config)?;
    let checks = match command {
        Command::Assemble => commands::assemble(&mut lab)?,
        Command::Functional => commands::functional(&mut lab)?,
        Command::Decompose => commands::decompose(&mut lab)?,
        Command::Validate => commands::validate(&mut lab)?,
        Command::Bmo => commands::bmo(&mut lab)?,
        Command::Carleson => commands::carleson(&mut lab)?,
        Command::Riesz => commands::riesz(&mut lab)?,
        Command::Equivalence => commands::equivalence(&mut lab)?,
        Command::Oracle => commands::oracle(&mut lab)?,
        Command::Report => commands::report(&mut lab)?,
    };
    let pass = checks.iter().all(|c| c.pass);
    lab.write_json(
        &format!("{}.json", command.name()),
        &serde_json::json!({ "command": command, "pass": pass, "checks": checks }),
    )?;
    let seconds = |t: SystemTime| t.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let meta = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": seconds(started),
        "elapsed_seconds": started.elapsed().map_or(0.0, |d| d.as_secs_f64()),
        "files": lab.files,
        "config": config,
    });
    lab.write_json(&format!("{}.metadata.json", command.name()), &meta)?;
    Ok(Outcome { command, checks, files: lab.files.clone(), output_dir: lab.dir.clone() })
}

#[cfg(test)]
mod tests;
