//! Experiment runner behind the `timechange` binary.
//!
//! A JSON [`ExperimentConfig`] selects kernels, models, grids and suites;
//! [`run`] executes the suites, writes one CSV per suite plus
//! `summary.json`, and reports pass/fail counts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod suites;

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;
use timechange::io::write_atomic;
use timechange::kernels::{AdmissibilityConfig, ClassOrigin, KernelClass, KernelSpec};

pub use config::{ExperimentConfig, GridSpec, Spacing, Suite};
pub use suites::SuiteOutcome;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or invalid input.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] timechange::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub status: String,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub suites: Vec<SuiteOutcome>,
}

impl RunSummary {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn exit_code(&self) -> u8 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }
}

/// Runs every requested suite and writes `summary.json` into `cfg.outputs`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    cfg.validate().map_err(CliError::Config)?;
    let out = cfg.outputs.as_path();
    std::fs::create_dir_all(out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
    let mut outcomes = Vec::new();
    for suite in cfg.ordered_suites() {
        outcomes.push(suites::run_suite(suite, cfg, out)?);
    }
    let summary = RunSummary {
        status: String::new(),
        passed: outcomes.iter().map(|o| o.passed).sum(),
        failed: outcomes.iter().map(|o| o.failed).sum(),
        skipped: outcomes.iter().map(|o| o.skipped).sum(),
        suites: outcomes,
    };
    let summary = RunSummary {
        status: if summary.all_passed() { "pass" } else { "fail" }.to_string(),
        ..summary
    };
    let mut json = serde_json::to_string_pretty(&summary).map_err(timechange::Error::from)?;
    json.push('\n');
    write_atomic(&out.join("summary.json"), json.as_bytes())?;
    Ok(summary)
}

/// Parses a kernel given either as inline JSON or as a path to a JSON file.
pub fn parse_kernel_arg(arg: &str) -> Result<KernelSpec, CliError> {
    let (text, source) = if arg.trim_start().starts_with('{') {
        (arg.to_string(), "kernel".to_string())
    } else {
        let text = std::fs::read_to_string(arg).map_err(|e| CliError::Config(format!("{arg}: {e}")))?;
        (text, arg.to_string())
    };
    let k: KernelSpec = serde_json::from_str(&text).map_err(|e| config::json_error(&source, &e))?;
    k.validate().map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    Ok(k)
}

pub fn class_tag(class: &KernelClass) -> String {
    match class {
        KernelClass::C1 { theta } => format!("class C1 θ={theta}"),
        KernelClass::C2 { mu0 } => format!("class C2 μ(0)={mu0}"),
        KernelClass::C3 { s, c } => format!("class C3 s={s} c={c}"),
    }
}

const INFO_LAMBDAS: [f64; 5] = [1e-4, 1e-2, 1.0, 1e2, 1e4];

/// Human-readable kernel report: class, sampled 𝒦 and the admissibility verdict.
pub fn info(k: &KernelSpec) -> Result<String, CliError> {
    let verdict = k.check_admissible(&AdmissibilityConfig::default())?.verdict;
    let yes_no = if verdict { "yes" } else { "no" };
    let mut s = String::new();
    writeln!(s, "kernel: {}", k.label()).unwrap();
    match k.classify_with_origin() {
        Ok(c) => {
            writeln!(s, "{}; admissible: {yes_no}", class_tag(&c.class)).unwrap();
            let origin = match c.origin {
                ClassOrigin::Exact => "exact",
                ClassOrigin::Asymptotic => "asymptotic",
            };
            writeln!(s, "class holds: {origin}").unwrap();
        }
        Err(timechange::Error::Unclassifiable(_)) => {
            writeln!(s, "class: outside C1/C2/C3; admissible: {yes_no}").unwrap()
        }
        Err(e) => return Err(e.into()),
    }
    for lambda in INFO_LAMBDAS {
        writeln!(s, "K({lambda:e}) = {:.10e}", k.laplace_k_real(lambda)?).unwrap();
    }
    Ok(s)
}
