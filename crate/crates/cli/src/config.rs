use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use timechange::asymptotics::VerifyConfig;
use timechange::kernels::KernelSpec;
use timechange::laplace::InversionConfig;
use timechange::models::{ModelSpec, QuadratureSpec};
use timechange::montecarlo::PathConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Density,
    Mc,
    Subordinate,
    Asymptotics,
    Admissibility,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Density => "density",
            Suite::Mc => "mc",
            Suite::Subordinate => "subordinate",
            Suite::Asymptotics => "asymptotics",
            Suite::Admissibility => "admissibility",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.lo];
        }
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Log => self.lo * (self.hi / self.lo).powf(f),
                    Spacing::Linear => self.lo + (self.hi - self.lo) * f,
                }
            })
            .collect()
    }

    fn check(&self, name: &str, min_points: usize, positive_lo: bool) -> Result<(), String> {
        let lo_ok = if positive_lo || self.spacing == Spacing::Log { self.lo > 0.0 } else { self.lo >= 0.0 };
        if !lo_ok || !self.lo.is_finite() {
            return Err(format!("{name}.lo = {} is out of range", self.lo));
        }
        if !(self.hi > self.lo) || !self.hi.is_finite() {
            return Err(format!("{name}.hi = {} must exceed lo = {}", self.hi, self.lo));
        }
        if self.points < min_points {
            return Err(format!("{name}.points = {} must be >= {min_points}", self.points));
        }
        Ok(())
    }
}

/// `source:line:col: message` for a JSON error, without serde's own position suffix.
pub fn json_error(source: &str, e: &serde_json::Error) -> CliError {
    let msg = e.to_string();
    let msg = msg.rfind(" at line ").map_or(msg.as_str(), |i| &msg[..i]);
    CliError::Config(format!("{source}:{}:{}: {msg}", e.line(), e.column()))
}

fn default_tau_grid() -> GridSpec {
    GridSpec {
        lo: 0.0,
        hi: 5.0,
        points: 51,
        spacing: Spacing::Linear,
    }
}

fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

fn default_mc_t() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernels: Vec<KernelSpec>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    pub t_grid: GridSpec,
    #[serde(default = "default_tau_grid")]
    pub tau_grid: GridSpec,
    #[serde(default)]
    pub inversion: InversionConfig,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub mc: Option<PathConfig>,
    /// Target times for the first-passage samples.
    #[serde(default = "default_mc_t")]
    pub mc_t: Vec<f64>,
    #[serde(default)]
    pub verify: VerifyConfig,
    /// Spatial point for the subordinated fields; the origin when absent.
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    pub suites: Vec<Suite>,
}

impl ExperimentConfig {
    /// Parses JSON, reporting syntax and shape errors as `source:line:col: message`.
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| json_error(source, &e))?;
        cfg.validate().map_err(|msg| CliError::Config(format!("{source}: {msg}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.suites.is_empty() {
            return Err("suites must be non-empty".into());
        }
        let distinct: BTreeSet<Suite> = self.suites.iter().copied().collect();
        if distinct.len() != self.suites.len() {
            return Err("suites contains duplicates".into());
        }
        if self.kernels.is_empty() {
            return Err("kernels must be non-empty".into());
        }
        for (i, k) in self.kernels.iter().enumerate() {
            k.validate().map_err(|e| format!("kernels[{i}]: {e}"))?;
        }
        for (i, m) in self.models.iter().enumerate() {
            m.validate().map_err(|e| format!("models[{i}]: {e}"))?;
        }
        self.t_grid.check("t_grid", 16, true)?;
        self.tau_grid.check("tau_grid", 2, false)?;
        self.inversion.validate().map_err(|e| format!("inversion: {e}"))?;
        self.quadrature.validate().map_err(|e| format!("quadrature: {e}"))?;
        if let Some(x) = self.x {
            if !x.is_finite() {
                return Err(format!("x = {x} is not finite"));
            }
        }
        let needs_models = [Suite::Subordinate, Suite::Asymptotics];
        if self.models.is_empty() && self.suites.iter().any(|s| needs_models.contains(s)) {
            return Err("models must be non-empty for the subordinate and asymptotics suites".into());
        }
        if self.suites.contains(&Suite::Mc) {
            let mc = self.mc.as_ref().ok_or("the mc suite needs an `mc` block")?;
            mc.validate().map_err(|e| format!("mc: {e}"))?;
            if self.mc_t.is_empty() || self.mc_t.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                return Err("mc_t must be a non-empty list of positive times".into());
            }
        }
        Ok(())
    }

    /// Suites in a fixed execution order, independent of how they were listed.
    pub fn ordered_suites(&self) -> Vec<Suite> {
        self.suites.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "kernels": [{"variant": "stable", "params": {"alpha": 0.5}}],
        "t_grid": {"lo": 0.5, "hi": 2, "points": 16},
        "suites": ["density"]
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL, "cfg.json").unwrap();
        assert_eq!(cfg.tau_grid.points, 51);
        assert_eq!(cfg.inversion, InversionConfig::default());
        assert_eq!(cfg.outputs, PathBuf::from("out"));
        let t = cfg.t_grid.values();
        assert_eq!(t.len(), 16);
        assert!((t[0] - 0.5).abs() < 1e-15 && (t[15] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn syntax_error_is_line_anchored() {
        let err = ExperimentConfig::parse("{\n  \"kernels\": [,\n}", "bad.json").unwrap_err();
        assert!(err.to_string().starts_with("bad.json:2:"), "{err}");
    }

    #[test]
    fn invariants_are_enforced() {
        let empty = MINIMAL.replace(r#"["density"]"#, "[]");
        assert!(ExperimentConfig::parse(&empty, "c").unwrap_err().to_string().contains("non-empty"));
        let few = MINIMAL.replace(r#""points": 16"#, r#""points": 15"#);
        assert!(ExperimentConfig::parse(&few, "c").is_err());
        let zero = MINIMAL.replace(r#""lo": 0.5"#, r#""lo": 0"#);
        assert!(ExperimentConfig::parse(&zero, "c").is_err());
        let mc = MINIMAL.replace(r#"["density"]"#, r#"["mc"]"#);
        assert!(ExperimentConfig::parse(&mc, "c").unwrap_err().to_string().contains("mc"));
        let bad_kernel = MINIMAL.replace("0.5}", "1.5}");
        assert!(ExperimentConfig::parse(&bad_kernel, "c").unwrap_err().to_string().contains("kernels[0]"));
    }
}
