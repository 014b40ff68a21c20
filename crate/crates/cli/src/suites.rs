use std::cell::RefCell;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use timechange::asymptotics::{self, ModelKind, SeriesMethod, VerifyCase, VerifyReport};
use timechange::density::{self, DensityGrid};
use timechange::io::write_atomic;
use timechange::kernels::{AdmissibilityConfig, KernelSpec};
use timechange::models::{self, ModelSpec};
use timechange::montecarlo;
use timechange::specfun;
use timechange::{Error, Result};

use crate::config::{ExperimentConfig, Suite};

pub const NORMALIZATION_TOL: f64 = 1e-4;
pub const CLOSED_FORM_TOL: f64 = 1e-6;
pub const KS_FLOOR: f64 = 0.015;
pub const Z_LIMIT: f64 = 3.0;
pub const MITTAG_LEFFLER_TOL: f64 = 1e-5;
const LAPLACE_LAMBDAS: [f64; 3] = [0.5, 1.0, 2.0];
/// Densities below this are excluded from relative-error checks.
const DENSITY_FLOOR: f64 = 1e-12;

const CHECK_HEADER: [&str; 7] = ["kernel", "check", "param", "value", "tolerance", "pass", "note"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn pass_field(pass: Option<bool>) -> &'static str {
    match pass {
        Some(true) => "true",
        Some(false) => "false",
        None => "skipped",
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SuiteOutcome {
    pub suite: String,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub files: Vec<String>,
}

impl SuiteOutcome {
    fn new(suite: Suite) -> Self {
        SuiteOutcome {
            suite: suite.name().to_string(),
            ..Default::default()
        }
    }

    fn tally(&mut self, pass: Option<bool>) {
        match pass {
            Some(true) => self.passed += 1,
            Some(false) => self.failed += 1,
            None => self.skipped += 1,
        }
    }
}

/// One pass/fail line in a check table.
struct Check {
    kernel: String,
    check: &'static str,
    param: f64,
    value: f64,
    tolerance: f64,
    pass: Option<bool>,
    note: String,
}

impl Check {
    fn against(kernel: &KernelSpec, check: &'static str, param: f64, value: f64, tolerance: f64) -> Self {
        Check {
            kernel: kernel.label(),
            check,
            param,
            value,
            tolerance,
            pass: Some(value.is_finite() && value.abs() <= tolerance),
            note: String::new(),
        }
    }

    fn from_result(kernel: &KernelSpec, check: &'static str, param: f64, tolerance: f64, value: Result<f64>) -> Self {
        match value {
            Ok(v) => Check::against(kernel, check, param, v, tolerance),
            Err(e) => Check::errored(kernel, check, param, tolerance, &e),
        }
    }

    fn errored(kernel: &KernelSpec, check: &'static str, param: f64, tolerance: f64, err: &Error) -> Self {
        Check {
            kernel: kernel.label(),
            check,
            param,
            value: f64::NAN,
            tolerance,
            pass: Some(false),
            note: err.to_string(),
        }
    }

    fn record(&self) -> [String; 7] {
        [
            self.kernel.clone(),
            self.check.to_string(),
            fmt_f64(self.param),
            fmt_f64(self.value),
            fmt_f64(self.tolerance),
            pass_field(self.pass).to_string(),
            self.note.clone(),
        ]
    }
}

fn csv_bytes<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn save_checks(out: &Path, name: &str, checks: &[Check], outcome: &mut SuiteOutcome) -> Result<()> {
    for c in checks {
        outcome.tally(c.pass);
    }
    let bytes = csv_bytes(CHECK_HEADER, checks.iter().map(Check::record))?;
    write_atomic(&out.join(name), &bytes)?;
    outcome.files.push(name.to_string());
    Ok(())
}

/// Closed-form G_t(τ) for the stable kernel of index 1/2.
pub fn stable_half_density(t: f64, tau: f64) -> f64 {
    (std::f64::consts::PI * t).powf(-0.5) * (-tau * tau / (4.0 * t)).exp()
}

fn is_stable_half(k: &KernelSpec) -> bool {
    matches!(k, KernelSpec::Stable { alpha } if *alpha == 0.5)
}

fn closed_form_error(grid: &DensityGrid, i_t: usize) -> f64 {
    let t = grid.t_values[i_t];
    grid.tau_values
        .iter()
        .zip(grid.row(i_t))
        .filter_map(|(&tau, &g)| {
            let exact = stable_half_density(t, tau);
            (exact > DENSITY_FLOOR).then(|| ((g - exact) / exact).abs())
        })
        .fold(0.0, f64::max)
}

fn density_file_name(cfg: &ExperimentConfig, i: usize) -> String {
    if cfg.kernels.len() == 1 {
        "density.csv".to_string()
    } else {
        format!("density_{i}.csv")
    }
}

pub fn density_suite(cfg: &ExperimentConfig, out: &Path) -> Result<SuiteOutcome> {
    let mut outcome = SuiteOutcome::new(Suite::Density);
    let t = cfg.t_grid.values();
    let tau = cfg.tau_grid.values();
    let mut checks = Vec::new();
    for (i, k) in cfg.kernels.iter().enumerate() {
        match DensityGrid::compute(k, &t, &tau, &cfg.inversion) {
            Ok(grid) => {
                let name = density_file_name(cfg, i);
                grid.save_csv(&out.join(&name))?;
                outcome.files.push(name);
                if is_stable_half(k) {
                    for (i_t, &ti) in t.iter().enumerate() {
                        checks.push(Check::against(k, "closed_form", ti, closed_form_error(&grid, i_t), CLOSED_FORM_TOL));
                    }
                }
            }
            Err(e) => checks.push(Check::errored(k, "grid", f64::NAN, 0.0, &e)),
        }
        let norms: Vec<Check> = t
            .par_iter()
            .map(|&ti| {
                let mass = density::normalization(k, ti, &cfg.inversion).map(|m| m - 1.0);
                Check::from_result(k, "normalization", ti, NORMALIZATION_TOL, mass)
            })
            .collect();
        checks.extend(norms);
    }
    save_checks(out, "density_checks.csv", &checks, &mut outcome)?;
    Ok(outcome)
}

/// KS acceptance threshold for `n` samples.
pub fn ks_threshold(n: usize) -> f64 {
    KS_FLOOR.max(1.63 / (n as f64).sqrt())
}

fn ks_check(k: &KernelSpec, set: &montecarlo::SampleSet, cfg: &ExperimentConfig) -> Check {
    let failure = RefCell::new(None);
    let d = montecarlo::ks_distance(set, |tau| {
        density::cdf_g(k, set.target_t, tau, &cfg.inversion).unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        })
    });
    let tol = ks_threshold(set.values.len());
    match failure.into_inner() {
        Some(e) => Check::errored(k, "ks", set.target_t, tol, &e),
        None => Check::against(k, "ks", set.target_t, d, tol),
    }
}

pub fn mc_suite(cfg: &ExperimentConfig, out: &Path) -> Result<SuiteOutcome> {
    let mut outcome = SuiteOutcome::new(Suite::Mc);
    let path_cfg = cfg
        .mc
        .ok_or_else(|| Error::InvalidParameter("the mc suite needs an `mc` block".into()))?;
    let mut checks = Vec::new();
    for (i, k) in cfg.kernels.iter().enumerate() {
        match montecarlo::first_passage_multi(k, &cfg.mc_t, &path_cfg) {
            Ok(sets) => {
                for (j, set) in sets.iter().enumerate() {
                    let name = format!("samples_{i}_{j}.csv");
                    set.save(&out.join(&name))?;
                    outcome.files.push(name);
                    outcome.files.push(format!("samples_{i}_{j}.json"));
                    checks.push(ks_check(k, set, cfg));
                }
            }
            Err(Error::SamplerUnavailable(label)) => {
                checks.push(Check {
                    kernel: label,
                    check: "ks",
                    param: f64::NAN,
                    value: f64::NAN,
                    tolerance: ks_threshold(path_cfg.n_paths),
                    pass: None,
                    note: "no sampler for this kernel".into(),
                });
                continue;
            }
            Err(e) => checks.push(Check::errored(k, "ks", f64::NAN, ks_threshold(path_cfg.n_paths), &e)),
        }
        for lambda in LAPLACE_LAMBDAS {
            let z = montecarlo::laplace_exponent_check(k, lambda, path_cfg.n_paths, path_cfg.seed)
                .map(|(est, exact)| est.z_score(exact));
            checks.push(Check::from_result(k, "laplace_exponent_z", lambda, Z_LIMIT, z));
        }
    }
    save_checks(out, "mc.csv", &checks, &mut outcome)?;
    Ok(outcome)
}

/// Closed-form subordinated value where one is known.
pub fn subordinate_reference(model: &ModelSpec, k: &KernelSpec, t: f64) -> Option<Result<f64>> {
    match (model, k) {
        (ModelSpec::ExpDecay { gamma, c }, KernelSpec::Stable { alpha }) => {
            Some(specfun::mittag_leffler_neg(*alpha, gamma * t.powf(*alpha)).map(|e| c * e))
        }
        _ => None,
    }
}

const SUBORDINATE_HEADER: [&str; 7] = ["kernel", "model", "t", "u", "reference", "pass", "note"];

fn subordinate_row(cfg: &ExperimentConfig, k: &KernelSpec, model: &ModelSpec, t: f64) -> ([String; 7], bool) {
    let u = models::subordinate(model, k, cfg.x, t, &cfg.quadrature, &cfg.inversion);
    let reference = subordinate_reference(model, k, t);
    let bound = model.sup_abs().abs() * (1.0 + 1e-9);
    let (u_val, ref_val, pass, note) = match (u, reference) {
        (Err(e), _) => (f64::NAN, f64::NAN, false, e.to_string()),
        (Ok(_), Some(Err(e))) => (f64::NAN, f64::NAN, false, format!("reference: {e}")),
        (Ok(u), r) => {
            let in_bounds = u.is_finite() && u.abs() <= bound;
            let mut note = if in_bounds { String::new() } else { format!("|u| exceeds {bound:e}") };
            let (ref_val, matches) = match r {
                Some(Ok(r)) => {
                    let rel = ((u - r) / r).abs();
                    if !(rel <= MITTAG_LEFFLER_TOL) {
                        note = format!("relative error {rel:e}");
                    }
                    (r, rel <= MITTAG_LEFFLER_TOL)
                }
                _ => (f64::NAN, true),
            };
            (u, ref_val, in_bounds && matches, note)
        }
    };
    let row = [
        k.label(),
        model.label(),
        fmt_f64(t),
        fmt_f64(u_val),
        if ref_val.is_nan() { String::new() } else { fmt_f64(ref_val) },
        pass_field(Some(pass)).to_string(),
        note,
    ];
    (row, pass)
}

pub fn subordinate_suite(cfg: &ExperimentConfig, out: &Path) -> Result<SuiteOutcome> {
    let mut outcome = SuiteOutcome::new(Suite::Subordinate);
    let t = cfg.t_grid.values();
    let mut cases: Vec<(&KernelSpec, &ModelSpec, f64)> = Vec::new();
    for k in &cfg.kernels {
        for m in &cfg.models {
            cases.extend(t.iter().map(|&ti| (k, m, ti)));
        }
    }
    let rows: Vec<([String; 7], bool)> = cases.par_iter().map(|&(k, m, ti)| subordinate_row(cfg, k, m, ti)).collect();
    for (_, pass) in &rows {
        outcome.tally(Some(*pass));
    }
    let bytes = csv_bytes(SUBORDINATE_HEADER, rows.into_iter().map(|(r, _)| r))?;
    write_atomic(&out.join("subordinate.csv"), &bytes)?;
    outcome.files.push("subordinate.csv".into());
    Ok(outcome)
}

fn unverified(case: &VerifyCase, pass: Option<bool>, note: String) -> VerifyReport {
    let kind = ModelKind::of(&case.model);
    VerifyReport {
        kernel: case.kernel.label(),
        class: String::new(),
        model: case.model.label(),
        d: kind.dimension(),
        r: kind.order(),
        predicted: None,
        fit: None,
        method: SeriesMethod::Skipped,
        pass,
        note: Some(note),
    }
}

/// Runs one verification case, turning kernels outside the classification
/// into skipped rows and other errors into failed rows.
pub fn verify_case(case: &VerifyCase, cfg: &asymptotics::VerifyConfig) -> VerifyReport {
    match asymptotics::verify(case, cfg) {
        Ok(report) => report,
        Err(e @ Error::Unclassifiable(_)) => unverified(case, None, e.to_string()),
        Err(e) => unverified(case, Some(false), e.to_string()),
    }
}

pub fn asymptotics_suite(cfg: &ExperimentConfig, out: &Path) -> Result<SuiteOutcome> {
    let mut outcome = SuiteOutcome::new(Suite::Asymptotics);
    let cases: Vec<VerifyCase> = cfg
        .kernels
        .iter()
        .flat_map(|k| {
            cfg.models.iter().map(move |m| VerifyCase {
                kernel: k.clone(),
                model: m.clone(),
                x: cfg.x,
            })
        })
        .collect();
    let reports: Vec<VerifyReport> = cases.par_iter().map(|c| verify_case(c, &cfg.verify)).collect();
    for r in &reports {
        outcome.tally(r.pass);
    }
    asymptotics::save_verify_csv(&out.join("verify.csv"), &reports)?;
    outcome.files.push("verify.csv".into());
    Ok(outcome)
}

const ADMISSIBILITY_HEADER: [&str; 12] = [
    "kernel",
    "class",
    "k_infinite_at_zero",
    "k_vanishes_at_infinity",
    "phi_vanishes_at_zero",
    "phi_infinite_at_infinity",
    "a1_liminf",
    "a1_s0",
    "a2_max_ratio_dev",
    "verdict",
    "pass",
    "note",
];

pub fn class_field(k: &KernelSpec) -> String {
    match k.classify() {
        Ok(c) => c.to_string(),
        Err(_) => "outside".to_string(),
    }
}

pub fn admissibility_suite(cfg: &ExperimentConfig, out: &Path) -> Result<SuiteOutcome> {
    let mut outcome = SuiteOutcome::new(Suite::Admissibility);
    let adm = AdmissibilityConfig::default();
    let rows: Vec<([String; 12], bool)> = cfg
        .kernels
        .par_iter()
        .map(|k| match k.check_admissible(&adm) {
            Ok(r) => {
                let h = r.h_limits_ok;
                let row = [
                    k.label(),
                    class_field(k),
                    h.k_infinite_at_zero.to_string(),
                    h.k_vanishes_at_infinity.to_string(),
                    h.phi_vanishes_at_zero.to_string(),
                    h.phi_infinite_at_infinity.to_string(),
                    fmt_f64(r.a1_liminf),
                    fmt_f64(r.a1_s0),
                    fmt_f64(r.a2_max_ratio_dev),
                    r.verdict.to_string(),
                    "true".to_string(),
                    r.diagnostic.unwrap_or_default(),
                ];
                (row, true)
            }
            Err(e) => {
                let mut row: [String; 12] = Default::default();
                row[0] = k.label();
                row[1] = class_field(k);
                row[10] = "false".to_string();
                row[11] = e.to_string();
                (row, false)
            }
        })
        .collect();
    for (_, pass) in &rows {
        outcome.tally(Some(*pass));
    }
    let bytes = csv_bytes(ADMISSIBILITY_HEADER, rows.into_iter().map(|(r, _)| r))?;
    write_atomic(&out.join("admissibility.csv"), &bytes)?;
    outcome.files.push("admissibility.csv".into());
    Ok(outcome)
}

pub fn run_suite(suite: Suite, cfg: &ExperimentConfig, out: &Path) -> Result<SuiteOutcome> {
    match suite {
        Suite::Density => density_suite(cfg, out),
        Suite::Mc => mc_suite(cfg, out),
        Suite::Subordinate => subordinate_suite(cfg, out),
        Suite::Asymptotics => asymptotics_suite(cfg, out),
        Suite::Admissibility => admissibility_suite(cfg, out),
    }
}
