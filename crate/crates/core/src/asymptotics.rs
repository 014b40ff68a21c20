//! Long-time behaviour of Cesàro means: the kernel ratio check, the table of
//! predicted decay laws, series generation and decay-law fitting.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density;
use crate::error::{Error, Result};
use crate::kernels::{AdmissibilityConfig, KernelClass, KernelSpec};
use crate::laplace::InversionConfig;
use crate::models::{ModelSpec, QuadratureSpec};
use crate::quad::{self, QuadOptions};

/// Rate t^{−p}·(log t)^{−q}, optionally times an extra log t (when p > 0) or
/// log log t (when q > 0) factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayLaw {
    pub p: f64,
    pub q: f64,
    /// −1 when the rate carries the extra logarithmic factor, else 0.
    pub l: i8,
    pub log_factor: bool,
}

impl DecayLaw {
    pub fn power(p: f64) -> Self {
        DecayLaw {
            p,
            q: 0.0,
            l: 0,
            log_factor: false,
        }
    }

    pub fn log_power(q: f64) -> Self {
        DecayLaw {
            p: 0.0,
            q,
            l: 0,
            log_factor: false,
        }
    }

    pub fn with_log_factor(self) -> Self {
        DecayLaw {
            l: -1,
            log_factor: true,
            ..self
        }
    }

    /// The rate itself, with unit constant; needs t > e when q > 0.
    pub fn eval(&self, t: f64) -> f64 {
        let lt = t.ln();
        let mut v = t.powf(-self.p) * lt.powf(-self.q);
        if self.log_factor {
            v *= if self.p > 0.0 { lt } else { lt.ln() };
        }
        v
    }

    /// Fit family whose model contains this law exactly.
    pub fn family(&self) -> FitFamily {
        match (self.p > 0.0, self.log_factor) {
            (true, false) => FitFamily::Power,
            (true, true) => FitFamily::PowerLog,
            (false, false) => FitFamily::LogPower,
            (false, true) => FitFamily::LogPowerLog,
        }
    }
}

impl fmt::Display for DecayLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.p > 0.0, self.log_factor) {
            (true, false) => write!(f, "t^-{}", self.p),
            (true, true) => write!(f, "t^-{} log t", self.p),
            (false, false) => write!(f, "(log t)^-{}", self.q),
            (false, true) => write!(f, "(log t)^-{} log log t", self.q),
        }
    }
}

/// Which u₀ the subordination is applied to, with its spatial parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    ExpDecay,
    PowerEnvelope { p: f64 },
    Heat { d: u32 },
    Nonlocal { d: u32, r: f64 },
}

impl ModelKind {
    pub fn of(model: &ModelSpec) -> Self {
        match model {
            ModelSpec::ExpDecay { .. } => ModelKind::ExpDecay,
            ModelSpec::PowerEnvelope { p, .. } => ModelKind::PowerEnvelope { p: *p },
            ModelSpec::HeatGaussian { d, .. } => ModelKind::Heat { d: *d },
            ModelSpec::Nonlocal1D { a_kind, .. } => ModelKind::Nonlocal { d: 1, r: a_kind.order() },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::ExpDecay => "exp_decay",
            ModelKind::PowerEnvelope { .. } => "power_envelope",
            ModelKind::Heat { .. } => "heat",
            ModelKind::Nonlocal { .. } => "nonlocal",
        }
    }

    pub fn dimension(&self) -> Option<u32> {
        match self {
            ModelKind::Heat { d } | ModelKind::Nonlocal { d, .. } => Some(*d),
            _ => None,
        }
    }

    pub fn order(&self) -> Option<f64> {
        match self {
            ModelKind::Heat { .. } => Some(2.0),
            ModelKind::Nonlocal { r, .. } => Some(*r),
            _ => None,
        }
    }

    /// Exponent e of the envelope sup|u₀(·,τ)| ≤ Cτ^{−e} for τ > 1, or
    /// `None` for exponential decay.
    fn envelope(&self) -> Result<Option<f64>> {
        match *self {
            ModelKind::ExpDecay => Ok(None),
            ModelKind::PowerEnvelope { p } if p > 1.0 => Ok(Some(p)),
            ModelKind::Heat { d } if d >= 1 => Ok(Some(d as f64 / 2.0)),
            ModelKind::Nonlocal { d, r } if d >= 1 && r > 1.0 && r <= 2.0 => Ok(Some(d as f64 / r)),
            other => Err(Error::NotInTable(format!("{other:?}"))),
        }
    }
}

/// Rate of M_t(k), which is the rate for every integrable envelope.
fn kernel_rate(class: &KernelClass) -> DecayLaw {
    match *class {
        KernelClass::C1 { theta } => DecayLaw::power(theta),
        KernelClass::C2 { .. } => DecayLaw::log_power(1.0),
        KernelClass::C3 { s, .. } => DecayLaw::log_power(1.0 + s),
    }
}

/// Predicted decay of M_t(u) from the Laplace-transform analysis, valid in
/// every dimension.
pub fn predict(class: &KernelClass, kind: &ModelKind) -> Result<DecayLaw> {
    let Some(e) = kind.envelope()? else {
        return Ok(kernel_rate(class));
    };
    const EPS: f64 = 1e-12;
    Ok(if e > 1.0 + EPS {
        kernel_rate(class)
    } else if (e - 1.0).abs() <= EPS {
        kernel_rate(class).with_log_factor()
    } else {
        // 𝒦·Φ^{e−1}Γ(1−e, Φ) ≈ Γ(1−e)·λ^{e−1}𝒦^e
        match *class {
            KernelClass::C1 { theta } => DecayLaw::power(theta * e),
            KernelClass::C2 { .. } => DecayLaw::log_power(e),
            KernelClass::C3 { s, .. } => DecayLaw::log_power((1.0 + s) * e),
        }
    })
}

/// Prediction by reduction to M_t(k), available only when τ ↦ sup|u₀(·,τ)|
/// is integrable.
pub fn predict_general(class: &KernelClass, kind: &ModelKind) -> Result<DecayLaw> {
    match kind.envelope()? {
        None => Ok(kernel_rate(class)),
        Some(e) if e > 1.0 => Ok(kernel_rate(class)),
        Some(e) => Err(Error::NotInTable(format!(
            "envelope tau^-{e} of {kind:?} is not integrable at infinity"
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct CesaroSeries {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub warnings: Vec<String>,
}

/// M_t = (1/t)∫₀ᵗ u(s) ds on the grid.
///
/// Each cell is integrated exactly for the power law through its endpoint
/// values (trapezoid where values are not positive); the cell [0, t₀] uses
/// the power law through the first two nodes.
pub fn cesaro(t: &[f64], u: &[f64]) -> Result<CesaroSeries> {
    if t.len() != u.len() || t.len() < 2 {
        return Err(Error::param("cesaro needs matching grids with at least 2 nodes"));
    }
    if !(t[0] > 0.0) || t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("cesaro grid must be positive and strictly increasing"));
    }
    let mut warnings = Vec::new();
    let t_max = t[t.len() - 1];
    if t[0] > 1e-3 * t_max {
        warnings.push(format!("first node {} exceeds 1e-3 of t_max = {t_max}", t[0]));
    }
    let exponent = |a: f64, b: f64, ua: f64, ub: f64| (ub / ua).ln() / (b / a).ln();
    let head = if u[0] > 0.0 && u[1] > 0.0 {
        let m = exponent(t[0], t[1], u[0], u[1]);
        if m <= -1.0 {
            warnings.push(format!("integrand behaves like t^{m:.3} near 0; integral diverges"));
            f64::NAN
        } else {
            t[0] * u[0] / (m + 1.0)
        }
    } else {
        t[0] * u[0]
    };
    let mut acc = head;
    let mut mean = vec![acc / t[0]];
    for i in 1..t.len() {
        let (a, b, ua, ub) = (t[i - 1], t[i], u[i - 1], u[i]);
        let cell = if ua > 0.0 && ub > 0.0 {
            let m = exponent(a, b, ua, ub);
            let ratio = b / a;
            if (m + 1.0).abs() < 1e-10 {
                ua * a * ratio.ln()
            } else {
                ua * a * (ratio.powf(m + 1.0) - 1.0) / (m + 1.0)
            }
        } else {
            0.5 * (b - a) * (ua + ub)
        };
        acc += cell;
        mean.push(acc / b);
    }
    Ok(CesaroSeries {
        t: t.to_vec(),
        mean,
        warnings,
    })
}

/// M_t(k) = (1/t)∫₀ᵗ k(s) ds.
pub fn cesaro_of_kernel(k: &KernelSpec, t: &[f64]) -> Result<Vec<f64>> {
    t.iter().map(|&ti| Ok(k.cumulative_kernel(ti)? / ti)).collect()
}

/// r(t) = ∫₀ᵗ G_s(τ) ds / ∫₀ᵗ k(s) ds, which tends to 1 for admissible k.
pub fn ratio_theorem_check(k: &KernelSpec, tau: f64, t: &[f64], cfg: &InversionConfig) -> Result<Vec<f64>> {
    let report = k.check_admissible(&AdmissibilityConfig::default())?;
    if !report.verdict {
        return Err(Error::param(format!(
            "{} is not admissible: {}",
            k.label(),
            report.diagnostic.unwrap_or_default()
        )));
    }
    t.iter()
        .map(|&ti| Ok(density::integrated_g(k, tau, ti, cfg)? / k.cumulative_kernel(ti)?))
        .collect()
}

/// M_t(u) = (1/t)∫₀^∞ u₀(x,τ)·∫₀ᵗ G_s(τ) ds dτ at one t.
pub fn cesaro_subordinated(
    model: &ModelSpec,
    k: &KernelSpec,
    x: Option<f64>,
    t: f64,
    q: &QuadratureSpec,
    cfg: &InversionConfig,
) -> Result<f64> {
    q.validate()?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("Cesàro mean needs t > 0, got {t}")));
    }
    // ∫_{τ*}^∞ ∫₀ᵗ G_s ds dτ ≤ t·P(E_t > τ*)
    let tau_star = density::tail_cutoff(k, t, q.tail_tol)?;
    let breaks = quad::geometric_breaks(tau_star / 4.0, tau_star, 2.0, 48);
    let mut failure = None;
    let v = quad::integrate_breaks(
        |tau: f64| {
            let value = model
                .eval_u0(x, tau)
                .and_then(|u| Ok(u * density::integrated_g(k, tau, t, cfg)?));
            value.unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        &breaks,
        QuadOptions::with_tol(0.0, 1e-8),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(v?.value / t)
}

/// (t, M_t(u)) on a grid, computed in the time domain.
pub fn time_domain_series(
    model: &ModelSpec,
    k: &KernelSpec,
    x: Option<f64>,
    t: &[f64],
    q: &QuadratureSpec,
    cfg: &InversionConfig,
) -> Result<Vec<(f64, f64)>> {
    t.par_iter()
        .map(|&ti| Ok((ti, cesaro_subordinated(model, k, x, ti, q, cfg)?)))
        .collect()
}

/// ∫₀^∞ u₀(x,τ) e^{−τφ} dτ.
fn damped_integral(model: &ModelSpec, x: Option<f64>, phi: f64) -> Result<f64> {
    if let ModelSpec::ExpDecay { gamma, c } = model {
        return Ok(c / (gamma + phi));
    }
    let mut failure = None;
    let v = quad::integrate_log_axis(
        |tau: f64| match model.eval_u0(x, tau) {
            Ok(u) => u * (-tau * phi).exp(),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        1.0 / phi,
        (1.0 / phi).ln() + 28.0,
        4.0,
        QuadOptions::with_tol(0.0, 1e-10),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(v?.value)
}

/// (t, λ·(ℒu)(λ)) at t = 1/λ. By the Karamata–Tauberian correspondence this
/// has the same rate in t as M_t(u).
pub fn transform_side_series(
    model: &ModelSpec,
    k: &KernelSpec,
    x: Option<f64>,
    lambdas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let mut out: Vec<(f64, f64)> = lambdas
        .par_iter()
        .map(|&lambda| {
            if !(lambda > 0.0) {
                return Err(Error::domain(format!("lambda = {lambda} must be > 0")));
            }
            let phi = k.phi_real(lambda)?;
            Ok((1.0 / lambda, phi * damped_integral(model, x, phi)?))
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFamily {
    /// log M = a − p log t
    Power,
    /// log M = a − q log log t
    LogPower,
    /// log M = a − p log t + b log log t
    PowerLog,
    /// log M = a − q log log t + b log log log t
    LogPowerLog,
}

impl FitFamily {
    pub const ALL: [FitFamily; 4] = [
        FitFamily::Power,
        FitFamily::LogPower,
        FitFamily::PowerLog,
        FitFamily::LogPowerLog,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: FitFamily,
    pub law: DecayLaw,
    pub stderr_p: f64,
    pub stderr_q: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub window: (f64, f64),
    /// Coefficient of the extra logarithmic regressor, when the family has one.
    pub log_coefficient: Option<f64>,
    pub poor_fit: bool,
}

struct Ols {
    coef: Vec<f64>,
    stderr: Vec<f64>,
    r2: f64,
    adj_r2: f64,
}

/// Least squares of y on an intercept plus `cols`.
fn ols(cols: &[Vec<f64>], y: &[f64]) -> Result<Ols> {
    let n = y.len();
    let k = cols.len() + 1;
    if n <= k {
        return Err(Error::param(format!("{n} points cannot fit {k} coefficients")));
    }
    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let yv = DVector::from_column_slice(y);
    let inv = (x.transpose() * &x)
        .try_inverse()
        .ok_or_else(|| Error::param("regressors are collinear on this window"))?;
    let coef = &inv * x.transpose() * &yv;
    let resid = &yv - &x * &coef;
    let mean = yv.mean();
    let ss_res = resid.norm_squared();
    let ss_tot = yv.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let sigma2 = ss_res / (n - k) as f64;
    let stderr = (0..k).map(|p| (sigma2 * inv[(p, p)]).max(0.0).sqrt()).collect();
    let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k) as f64;
    Ok(Ols {
        coef: coef.iter().copied().collect(),
        stderr,
        r2,
        adj_r2,
    })
}

/// Fits `family` to the points of `series` inside `window`.
pub fn fit_decay(series: &[(f64, f64)], family: FitFamily, window: (f64, f64)) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 * (1.0 - 1e-12) && t <= window.1 * (1.0 + 1e-12))
        .collect();
    if let Some(&(t, m)) = pts.iter().find(|&&(_, m)| !(m > 0.0)) {
        return Err(Error::domain(format!("series value {m} at t = {t} is not positive")));
    }
    if pts.len() < 4 {
        return Err(Error::param(format!("only {} points in window {window:?}", pts.len())));
    }
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    if hi / lo < 100.0 * (1.0 - 1e-9) {
        return Err(Error::param(format!("window [{lo}, {hi}] spans fewer than 2 decades")));
    }
    let needs = match family {
        FitFamily::Power => 0.0,
        FitFamily::LogPower | FitFamily::PowerLog => 1.0,
        FitFamily::LogPowerLog => std::f64::consts::E,
    };
    if lo.ln() <= needs {
        return Err(Error::domain(format!("{family:?} needs log t > {needs} on the window, got t = {lo}")));
    }
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let lt: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let llt: Vec<f64> = lt.iter().map(|v| v.ln()).collect();
    let lllt: Vec<f64> = llt.iter().map(|v| v.ln()).collect();
    let (fit, law, stderr_p, stderr_q, log_coefficient) = match family {
        FitFamily::Power => {
            let f = ols(&[lt], &y)?;
            let law = DecayLaw::power(-f.coef[1]);
            let se = f.stderr[1];
            (f, law, se, 0.0, None)
        }
        FitFamily::LogPower => {
            let f = ols(&[llt], &y)?;
            let law = DecayLaw::log_power(-f.coef[1]);
            let se = f.stderr[1];
            (f, law, 0.0, se, None)
        }
        FitFamily::PowerLog => {
            let f = ols(&[lt, llt], &y)?;
            let b = f.coef[2];
            let mut law = DecayLaw::power(-f.coef[1]);
            if b > 0.0 {
                law = law.with_log_factor();
            }
            let se = f.stderr[1];
            (f, law, se, 0.0, Some(b))
        }
        FitFamily::LogPowerLog => {
            let f = ols(&[llt, lllt], &y)?;
            let b = f.coef[2];
            let mut law = DecayLaw::log_power(-f.coef[1]);
            if b > 0.0 {
                law = law.with_log_factor();
            }
            let se = f.stderr[1];
            (f, law, 0.0, se, Some(b))
        }
    };
    Ok(FitResult {
        family,
        law,
        stderr_p,
        stderr_q,
        r_squared: fit.r2,
        adj_r_squared: fit.adj_r2,
        window: (lo, hi),
        log_coefficient,
        poor_fit: fit.r2 < 0.9,
    })
}

/// Fits every family that applies and returns them all, best adjusted r² first.
pub fn fit_best(series: &[(f64, f64)], window: (f64, f64)) -> Result<Vec<FitResult>> {
    let mut fits: Vec<FitResult> = FitFamily::ALL
        .iter()
        .filter_map(|&f| fit_decay(series, f, window).ok())
        .collect();
    if fits.is_empty() {
        return Err(Error::param(format!("no fit family applies on window {window:?}")));
    }
    fits.sort_by(|a, b| b.adj_r_squared.total_cmp(&a.adj_r_squared));
    Ok(fits)
}

/// Slope of log(M·t^p) against log log t.
pub fn residual_log_slope(series: &[(f64, f64)], p: f64, window: (f64, f64)) -> Result<f64> {
    let adjusted: Vec<(f64, f64)> = series.iter().map(|&(t, m)| (t, m * t.powf(p))).collect();
    Ok(-fit_decay(&adjusted, FitFamily::LogPower, window)?.law.q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMethod {
    TimeDomain,
    TransformSide,
    Skipped,
}

impl fmt::Display for SeriesMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesMethod::TimeDomain => "time-domain",
            SeriesMethod::TransformSide => "transform-side",
            SeriesMethod::Skipped => "skipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyCase {
    pub kernel: KernelSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub x: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub power_window: (f64, f64),
    pub log_window: (f64, f64),
    pub points_per_decade: usize,
    pub tol_p: f64,
    pub tol_q: f64,
    pub quadrature: QuadratureSpec,
    pub inversion: InversionConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            power_window: (1e2, 1e6),
            log_window: (1e2, 1e8),
            points_per_decade: 4,
            tol_p: 0.05,
            tol_q: 0.2,
            quadrature: QuadratureSpec::default(),
            inversion: InversionConfig::default(),
        }
    }
}

/// Log-spaced grid on [lo, hi] with `per_decade` points per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).round() as usize).max(1);
    (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub kernel: String,
    pub class: String,
    pub model: String,
    pub d: Option<u32>,
    pub r: Option<f64>,
    pub predicted: Option<DecayLaw>,
    pub fit: Option<FitResult>,
    pub method: SeriesMethod,
    /// `None` when the case was skipped.
    pub pass: Option<bool>,
    pub note: Option<String>,
}

pub const VERIFY_HEADER: [&str; 17] = [
    "kernel",
    "class",
    "model",
    "d",
    "r",
    "predicted_p",
    "predicted_q",
    "log_factor",
    "fitted_p",
    "fitted_q",
    "stderr_p",
    "stderr_q",
    "r2",
    "window_lo",
    "window_hi",
    "method",
    "pass",
];

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

impl VerifyReport {
    pub fn csv_record(&self) -> [String; 17] {
        let fit = self.fit.as_ref();
        [
            self.kernel.clone(),
            self.class.clone(),
            self.model.clone(),
            self.d.map(|d| d.to_string()).unwrap_or_default(),
            num(self.r),
            num(self.predicted.map(|l| l.p)),
            num(self.predicted.map(|l| l.q)),
            self.predicted.map(|l| l.log_factor.to_string()).unwrap_or_default(),
            num(fit.map(|f| f.law.p)),
            num(fit.map(|f| f.law.q)),
            num(fit.map(|f| f.stderr_p)),
            num(fit.map(|f| f.stderr_q)),
            num(fit.map(|f| f.r_squared)),
            num(fit.map(|f| f.window.0)),
            num(fit.map(|f| f.window.1)),
            self.method.to_string(),
            self.pass.map(|p| p.to_string()).unwrap_or_else(|| "skipped".into()),
        ]
    }
}

pub fn write_verify_csv<W: Write>(out: W, reports: &[VerifyReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERIFY_HEADER)?;
    for r in reports {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_verify_csv(path: &Path, reports: &[VerifyReport]) -> Result<()> {
    let mut buf = Vec::new();
    write_verify_csv(&mut buf, reports)?;
    crate::io::write_atomic(path, &buf)
}

/// Generates the Cesàro series for a case, fits it and compares with the
/// predicted law. C1 kernels use the time domain on the power window; C2/C3
/// kernels use the transform side on the log window.
pub fn verify(case: &VerifyCase, cfg: &VerifyConfig) -> Result<VerifyReport> {
    let kind = ModelKind::of(&case.model);
    let class = case.kernel.classify()?;
    let mut report = VerifyReport {
        kernel: case.kernel.label(),
        class: class.to_string(),
        model: case.model.label(),
        d: kind.dimension(),
        r: kind.order(),
        predicted: None,
        fit: None,
        method: SeriesMethod::Skipped,
        pass: None,
        note: None,
    };
    let predicted = match predict(&class, &kind) {
        Ok(law) => law,
        Err(Error::NotInTable(msg)) => {
            report.note = Some(msg);
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    report.predicted = Some(predicted);
    match class {
        KernelClass::C1 { .. } => {
            let (lo, hi) = cfg.power_window;
            let ts = log_grid(lo, hi, cfg.points_per_decade);
            let series = time_domain_series(&case.model, &case.kernel, case.x, &ts, &cfg.quadrature, &cfg.inversion)?;
            report.method = SeriesMethod::TimeDomain;
            if predicted.log_factor {
                let fit = fit_decay(&series, FitFamily::PowerLog, cfg.power_window)?;
                let slope = residual_log_slope(&series, predicted.p, cfg.power_window)?;
                report.pass = Some(slope > 0.0);
                report.note = Some(format!("residual log-log slope {slope:.4}"));
                report.fit = Some(fit);
            } else {
                let fit = fit_decay(&series, FitFamily::Power, cfg.power_window)?;
                report.pass = Some((fit.law.p - predicted.p).abs() <= cfg.tol_p);
                report.fit = Some(fit);
            }
        }
        KernelClass::C2 { .. } | KernelClass::C3 { .. } => {
            let (lo, hi) = cfg.log_window;
            let lambdas = log_grid(1.0 / hi, 1.0 / lo, cfg.points_per_decade);
            let series = transform_side_series(&case.model, &case.kernel, case.x, &lambdas)?;
            report.method = SeriesMethod::TransformSide;
            let family = if predicted.log_factor {
                FitFamily::LogPowerLog
            } else {
                FitFamily::LogPower
            };
            let fit = fit_decay(&series, family, cfg.log_window)?;
            report.pass = Some((fit.law.q - predicted.q).abs() <= cfg.tol_q);
            report.fit = Some(fit);
        }
    }
    Ok(report)
}
