//! Solutions u₀(x,t) of classical Cauchy problems and their subordination
//! u(x,t) = ∫₀^∞ u₀(x,τ) G_t(τ) dτ.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::density;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::laplace::InversionConfig;
use crate::quad::{self, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKernel {
    /// a(x) = e^{−x²/2}/√(2π), â(ξ) = e^{−ξ²/2}
    Gaussian,
    /// a(x) = 1/(π(1+x²)), â(ξ) = e^{−|ξ|}
    Cauchy,
}

impl JumpKernel {
    pub fn symbol(self, xi: f64) -> f64 {
        match self {
            JumpKernel::Gaussian => (-0.5 * xi * xi).exp(),
            JumpKernel::Cauchy => (-xi.abs()).exp(),
        }
    }

    /// Exponent r in â(ξ) = 1 − A|ξ|^r + o(|ξ|^r).
    pub fn order(self) -> f64 {
        match self {
            JumpKernel::Gaussian => 2.0,
            JumpKernel::Cauchy => 1.0,
        }
    }

    /// Width of the jump distribution after time t, added to the datum's.
    fn spread(self, sigma: f64, t: f64) -> f64 {
        match self {
            JumpKernel::Gaussian => (sigma * sigma + t).sqrt(),
            JumpKernel::Cauchy => sigma + t,
        }
    }
}

/// Centered Gaussian initial datum φ(x) = mass·e^{−x²/(2σ²)}/(√(2π)σ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianDatum {
    pub sigma: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

impl GaussianDatum {
    pub fn eval(&self, x: f64) -> f64 {
        self.mass * (-0.5 * (x / self.sigma).powi(2)).exp() / ((2.0 * PI).sqrt() * self.sigma)
    }

    pub fn transform(&self, xi: f64) -> f64 {
        self.mass * (-0.5 * (self.sigma * xi).powi(2)).exp()
    }
}

/// Periodic FFT box used for the non-local field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FftGrid {
    /// Box length in units of the largest spread.
    pub box_factor: f64,
    /// Initial spacing in units of σ.
    pub dx_over_sigma: f64,
    pub max_doublings: u32,
    /// Relative sup-norm change accepted between successive resolutions.
    pub rel_change: f64,
}

impl Default for FftGrid {
    fn default() -> Self {
        FftGrid {
            box_factor: 40.0,
            dx_over_sigma: 0.5,
            max_doublings: 6,
            rel_change: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
pub enum ModelSpec {
    /// u₀(t) = c·e^{−γt}
    ExpDecay { gamma: f64, c: f64 },
    /// Heat flow of a unit Gaussian started at time t0.
    HeatGaussian { d: u32, t0: f64 },
    /// u₀(t) = c·min(1, t^{−p})
    PowerEnvelope { p: f64, c: f64 },
    /// ∂ₜu = a∗u − u on ℝ, solved spectrally.
    #[serde(rename = "nonlocal1d")]
    Nonlocal1D {
        a_kind: JumpKernel,
        phi: GaussianDatum,
        #[serde(default)]
        grid: FftGrid,
    },
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: ModelSpec = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::param(msg));
        match self {
            ModelSpec::ExpDecay { gamma, c } if !(*gamma > 0.0 && *c > 0.0) => {
                bad(format!("exp_decay needs gamma, c > 0 (gamma = {gamma}, c = {c})"))
            }
            ModelSpec::HeatGaussian { d, t0 } if *d < 1 || !(*t0 > 0.0) => {
                bad(format!("heat_gaussian needs d >= 1, t0 > 0 (d = {d}, t0 = {t0})"))
            }
            ModelSpec::PowerEnvelope { p, c } if !(*p > 0.0 && *c > 0.0) => {
                bad(format!("power_envelope needs p, c > 0 (p = {p}, c = {c})"))
            }
            ModelSpec::Nonlocal1D { phi, grid, .. }
                if !(phi.sigma > 0.0 && phi.mass > 0.0)
                    || !(grid.box_factor >= 1.0 && grid.dx_over_sigma > 0.0 && grid.rel_change > 0.0) =>
            {
                bad("nonlocal1d needs sigma, mass > 0 and a positive grid spec".into())
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSpec::ExpDecay { gamma, c } => format!("exp_decay(gamma={gamma},c={c})"),
            ModelSpec::HeatGaussian { d, t0 } => format!("heat_gaussian(d={d},t0={t0})"),
            ModelSpec::PowerEnvelope { p, c } => format!("power_envelope(p={p},c={c})"),
            ModelSpec::Nonlocal1D { a_kind, phi, .. } => format!("nonlocal1d({a_kind:?},sigma={})", phi.sigma),
        }
    }

    /// sup over x, t of |u₀|.
    pub fn sup_abs(&self) -> f64 {
        match self {
            ModelSpec::ExpDecay { c, .. } | ModelSpec::PowerEnvelope { c, .. } => *c,
            ModelSpec::HeatGaussian { d, t0 } => (4.0 * PI * t0).powf(-(*d as f64) / 2.0),
            ModelSpec::Nonlocal1D { phi, .. } => phi.eval(0.0),
        }
    }

    /// u₀(x, t). `x` is a distance from the origin; `None` means the origin.
    pub fn eval_u0(&self, x: Option<f64>, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("model evaluated at t = {t}; need t >= 0")));
        }
        let x = x.unwrap_or(0.0);
        Ok(match self {
            ModelSpec::ExpDecay { gamma, c } => c * (-gamma * t).exp(),
            ModelSpec::HeatGaussian { d, t0 } => {
                let s = t + t0;
                (4.0 * PI * s).powf(-(*d as f64) / 2.0) * (-x * x / (4.0 * s)).exp()
            }
            ModelSpec::PowerEnvelope { p, c } => c * t.powf(-p).min(1.0),
            ModelSpec::Nonlocal1D { a_kind, phi, .. } => nonlocal_point(*a_kind, phi, x, t)?,
        })
    }

    /// max over space of |u₀(·, t)| on each t.
    pub fn sup_norm_decay(&self, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        match self {
            ModelSpec::HeatGaussian { .. } => t_grid.iter().map(|&t| Ok((t, self.eval_u0(None, t)?))).collect(),
            ModelSpec::Nonlocal1D { .. } => {
                let field = NonlocalField::solve(self, t_grid)?;
                Ok(t_grid.iter().copied().zip(field.sup_norms).collect())
            }
            other => Err(Error::param(format!("sup_norm_decay needs a spatial model, got {}", other.label()))),
        }
    }
}

/// u(x,t) = (1/π)∫₀^∞ cos(xξ)·e^{t(â(ξ)−1)}·φ̂(ξ) dξ.
fn nonlocal_point(a: JumpKernel, phi: &GaussianDatum, x: f64, t: f64) -> Result<f64> {
    let upper = 9.0 / phi.sigma;
    let scale = (1.0 / a.spread(0.0, t.max(1e-12))).min(upper / 2.0);
    let breaks = quad::geometric_breaks(scale, upper, 2.0, 12);
    let f = |xi: f64| (x * xi).cos() * (t * (a.symbol(xi) - 1.0)).exp() * phi.transform(xi);
    let v = quad::integrate_breaks(f, &breaks, QuadOptions::with_tol(1e-15, 1e-11))?.value;
    Ok(v / PI)
}

/// Spectral solution of the non-local equation on a periodic box.
#[derive(Debug, Clone)]
pub struct NonlocalField {
    pub x: Vec<f64>,
    pub t_values: Vec<f64>,
    /// `fields[i]` is u(·, t_i) on `x`.
    pub fields: Vec<Vec<f64>>,
    pub sup_norms: Vec<f64>,
    pub dx: f64,
}

impl NonlocalField {
    /// Solves on a box of `box_factor` spreads at the largest t, doubling the
    /// resolution until the sup norms settle.
    pub fn solve(model: &ModelSpec, t_values: &[f64]) -> Result<Self> {
        let ModelSpec::Nonlocal1D { a_kind, phi, grid } = model else {
            return Err(Error::param("NonlocalField needs a nonlocal1d model"));
        };
        model.validate()?;
        if t_values.iter().any(|&t| !(t >= 0.0)) {
            return Err(Error::domain("nonlocal times must be >= 0"));
        }
        let t_max = t_values.iter().fold(0.0f64, |m, &t| m.max(t));
        let length = grid.box_factor * a_kind.spread(phi.sigma, t_max);
        let mut n = ((length / (grid.dx_over_sigma * phi.sigma)).ceil() as usize).next_power_of_two().max(64);
        let mut prev = Self::on_grid(*a_kind, phi, t_values, length, n);
        for _ in 0..grid.max_doublings {
            n *= 2;
            let next = Self::on_grid(*a_kind, phi, t_values, length, n);
            let change = prev
                .sup_norms
                .iter()
                .zip(&next.sup_norms)
                .map(|(a, b)| (a - b).abs() / b.abs())
                .fold(0.0f64, f64::max);
            if change < grid.rel_change {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::Resolution(format!(
            "sup norm still changing after {} doublings ({} points)",
            grid.max_doublings, n
        )))
    }

    fn on_grid(a: JumpKernel, phi: &GaussianDatum, t_values: &[f64], length: f64, n: usize) -> Self {
        let dx = length / n as f64;
        let x: Vec<f64> = (0..n).map(|j| -0.5 * length + j as f64 * dx).collect();
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_inverse(n);
        let mut fields = Vec::with_capacity(t_values.len());
        let mut sup_norms = Vec::with_capacity(t_values.len());
        for &t in t_values {
            // û(ξ_k) with the (−1)^k shift that centres the box on x = 0
            let mut buf: Vec<Complex64> = (0..n)
                .map(|k| {
                    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                    let xi = 2.0 * PI * signed / length;
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    Complex64::new(sign * (t * (a.symbol(xi) - 1.0)).exp() * phi.transform(xi) / length, 0.0)
                })
                .collect();
            fft.process(&mut buf);
            let field: Vec<f64> = buf.iter().map(|z| z.re).collect();
            sup_norms.push(field.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            fields.push(field);
        }
        NonlocalField {
            x,
            t_values: t_values.to_vec(),
            fields,
            sup_norms,
            dx,
        }
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.fields[i].iter().sum::<f64>() * self.dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadScheme {
    AdaptiveSimpson,
    GaussLaguerreMapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    pub scheme: QuadScheme,
    pub n_nodes: usize,
    /// Bound on the τ-tail mass left out of the integral.
    pub tail_tol: f64,
    /// Relative agreement required between n and n/2 Laguerre nodes before
    /// falling back to adaptive Simpson.
    pub check_rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            scheme: QuadScheme::GaussLaguerreMapped,
            n_nodes: 200,
            tail_tol: 1e-10,
            check_rel_tol: 1e-8,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tol > 0.0 && self.tail_tol <= 1e-3) {
            return Err(Error::param(format!("tail_tol {} outside (0, 1e-3]", self.tail_tol)));
        }
        if !(8..=400).contains(&self.n_nodes) {
            return Err(Error::param(format!("n_nodes {} outside [8, 400]", self.n_nodes)));
        }
        Ok(())
    }
}

/// u(x,t) = ∫₀^∞ u₀(x,τ) G_t(τ) dτ.
pub fn subordinate(
    model: &ModelSpec,
    k: &KernelSpec,
    x: Option<f64>,
    t: f64,
    q: &QuadratureSpec,
    cfg: &InversionConfig,
) -> Result<f64> {
    q.validate()?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("subordinate needs t > 0, got {t}")));
    }
    // beyond τ* the neglected part is at most sup|u₀|·P(E_t > τ*)
    let tau_star = density::tail_cutoff(k, t, q.tail_tol)?;
    let integrand = |tau: f64| -> Result<f64> {
        if tau > tau_star {
            return Ok(0.0);
        }
        Ok(model.eval_u0(x, tau)? * density::density_g(k, t, tau, cfg)?)
    };
    let simpson = || -> Result<f64> {
        let mut failure = None;
        let v = quad::adaptive_simpson(
            |tau| {
                integrand(tau).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    0.0
                })
            },
            0.0,
            tau_star,
            1e-9 * model.sup_abs(),
            50,
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(v),
        }
    };
    match q.scheme {
        QuadScheme::AdaptiveSimpson => simpson(),
        QuadScheme::GaussLaguerreMapped => {
            // the Laguerre weight e^{−τ/scale} falls to tail_tol at τ*, beyond
            // which the integrand is dropped
            let scale = tau_star / (1.0 / q.tail_tol).ln();
            let laguerre = |n: usize| -> Result<f64> {
                let rule = quad::gauss_laguerre_modified(n);
                let mut s = 0.0;
                for (&xn, &w) in rule.nodes.iter().zip(&rule.weights) {
                    s += w * scale * integrand(scale * xn)?;
                }
                Ok(s)
            };
            let fine = laguerre(q.n_nodes)?;
            let coarse = laguerre(q.n_nodes / 2)?;
            if (fine - coarse).abs() <= q.check_rel_tol * fine.abs() {
                Ok(fine)
            } else {
                simpson()
            }
        }
    }
}

/// Writes a `t,u` series as CSV.
pub fn write_series_csv<W: Write>(mut out: W, series: &[(f64, f64)]) -> Result<()> {
    writeln!(out, "t,u")?;
    for (t, u) in series {
        writeln!(out, "{t:.16e},{u:.16e}")?;
    }
    Ok(())
}

pub fn save_series_csv(path: &Path, series: &[(f64, f64)]) -> Result<()> {
    let mut buf = Vec::new();
    write_series_csv(&mut buf, series)?;
    crate::io::write_atomic(path, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn nonlocal(a_kind: JumpKernel) -> ModelSpec {
        ModelSpec::Nonlocal1D {
            a_kind,
            phi: GaussianDatum { sigma: 1.0, mass: 1.0 },
            grid: FftGrid::default(),
        }
    }

    #[test]
    fn eval_examples() {
        let e = ModelSpec::ExpDecay { gamma: 1.0, c: 1.0 };
        assert!(rel(e.eval_u0(None, 1.0).unwrap(), (-1.0f64).exp()) < 1e-15);
        let h = ModelSpec::HeatGaussian { d: 2, t0: 1.0 };
        assert!(rel(h.eval_u0(Some(0.0), 0.0).unwrap(), 1.0 / (4.0 * PI)) < 1e-15);
        let p = ModelSpec::PowerEnvelope { p: 1.5, c: 2.0 };
        assert_eq!(p.eval_u0(None, 0.5).unwrap(), 2.0);
        assert!(rel(p.eval_u0(None, 4.0).unwrap(), 0.25) < 1e-15);
        assert!(matches!(e.eval_u0(None, -1.0), Err(Error::Domain(_))));
        let n = nonlocal(JumpKernel::Gaussian);
        assert!(rel(n.eval_u0(Some(0.7), 0.0).unwrap(), (-0.245f64).exp() / (2.0 * PI).sqrt()) < 1e-10);
    }

    #[test]
    fn json_forms() {
        let m = ModelSpec::from_json(r#"{"variant":"heat_gaussian","params":{"d":3,"t0":1.0}}"#).unwrap();
        assert_eq!(m, ModelSpec::HeatGaussian { d: 3, t0: 1.0 });
        let m = ModelSpec::from_json(
            r#"{"variant":"nonlocal1d","params":{"a_kind":"cauchy","phi":{"sigma":1.0}}}"#,
        )
        .unwrap();
        assert!(matches!(m, ModelSpec::Nonlocal1D { a_kind: JumpKernel::Cauchy, .. }));
        assert!(ModelSpec::from_json(r#"{"variant":"exp_decay","params":{"gamma":-1.0,"c":1.0}}"#).is_err());
    }

    #[test]
    fn heat_bounds_hold_with_exact_constants() {
        for d in 1..=3 {
            let (t0, df) = (0.5, d as f64);
            let h = ModelSpec::HeatGaussian { d, t0 };
            let c = (4.0 * PI * t0).powf(-df / 2.0);
            let c2 = (4.0 * PI).powf(-df / 2.0);
            let mut last = f64::INFINITY;
            for i in 0..200 {
                let tau = 10f64.powf(-3.0 + i as f64 * 0.04);
                let v = h.eval_u0(None, tau).unwrap();
                assert!(v < last);
                last = v;
                if tau <= 1.0 {
                    assert!(v <= c);
                } else {
                    assert!(v <= c2 * tau.powf(-df / 2.0));
                }
            }
        }
    }

    #[test]
    fn nonlocal_field_matches_pointwise_and_conserves_mass() {
        for kind in [JumpKernel::Gaussian, JumpKernel::Cauchy] {
            let m = nonlocal(kind);
            let ts = [0.0, 1.0, 10.0, 50.0];
            let field = NonlocalField::solve(&m, &ts).unwrap();
            for (i, &t) in ts.iter().enumerate() {
                assert!((field.mass(i) - 1.0).abs() < 1e-8, "{kind:?} t={t}: {}", field.mass(i));
                let centre = field.x.iter().position(|&x| x.abs() < 1e-9).unwrap();
                let point = m.eval_u0(Some(0.0), t).unwrap();
                // the Cauchy field's x⁻² tails alias across the periodic box
                let tol = if kind == JumpKernel::Gaussian { 1e-8 } else { 5e-3 };
                let err = rel(field.fields[i][centre], point);
                assert!(err < tol, "{kind:?} t={t}: {err:e}");
                assert_eq!(field.sup_norms[i], field.fields[i][centre]);
            }
        }
    }

    #[test]
    fn heat_sup_norm_slope() {
        let h = ModelSpec::HeatGaussian { d: 1, t0: 1.0 };
        let s = h.sup_norm_decay(&[1e2, 1e4]).unwrap();
        let slope = (s[1].1 / s[0].1).ln() / (1e4f64 / 1e2).ln();
        assert!((slope + 0.5).abs() < 0.02);
    }

    #[test]
    fn subordinated_exponential_is_mittag_leffler() {
        let e = ModelSpec::ExpDecay { gamma: 1.0, c: 1.0 };
        let k = KernelSpec::stable(0.5).unwrap();
        let cfg = InversionConfig::default();
        let v = subordinate(&e, &k, None, 1.0, &QuadratureSpec::default(), &cfg).unwrap();
        assert!(rel(v, std::f64::consts::E * specfun::erfc(1.0)) < 1e-7, "{v}");
        let simpson = QuadratureSpec {
            scheme: QuadScheme::AdaptiveSimpson,
            ..QuadratureSpec::default()
        };
        let w = subordinate(&e, &k, None, 1.0, &simpson, &cfg).unwrap();
        assert!(rel(w, v) < 1e-7);
        for i in 0..20 {
            let t = 0.01 * 2000f64.powf(i as f64 / 19.0);
            let u = subordinate(&e, &k, None, t, &QuadratureSpec::default(), &cfg).unwrap();
            let exact = t.exp() * specfun::erfc(t.sqrt());
            assert!(rel(u, exact) < 1e-6, "t={t}: {u} vs {exact}");
        }
        let early = subordinate(&e, &k, None, 1e-8, &QuadratureSpec::default(), &cfg).unwrap();
        assert!((early - 1.0).abs() < 1e-3);
    }

    #[test]
    fn subordination_stays_within_datum_range() {
        let cfg = InversionConfig::default();
        let q = QuadratureSpec::default();
        let models = [
            ModelSpec::ExpDecay { gamma: 2.0, c: 1.5 },
            ModelSpec::HeatGaussian { d: 3, t0: 1.0 },
            ModelSpec::PowerEnvelope { p: 1.5, c: 1.0 },
        ];
        let cases = [
            (KernelSpec::stable(0.6).unwrap(), &[0.1, 1.0, 10.0, 100.0][..]),
            (KernelSpec::gamma(1.0, 1.0).unwrap(), &[0.1, 1.0, 10.0][..]),
        ];
        for (k, ts) in &cases {
            for m in &models {
                for &t in *ts {
                    let u = subordinate(m, k, None, t, &q, &cfg).unwrap();
                    assert!(u >= 0.0 && u <= m.sup_abs() * (1.0 + 1e-9), "{} {} t={t}: {u}", m.label(), k.label());
                }
            }
        }
    }
}
