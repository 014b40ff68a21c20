//! The inverse-subordinator density G_t(τ), computed by inverting its
//! t-Laplace transform g(λ,τ) = 𝒦(λ)·e^{−τΦ(λ)}.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::laplace::{self, InversionConfig};
use crate::quad::{self, QuadOptions};

/// Largest negative inversion value tolerated before it is treated as failure.
pub const MAX_CLAMP: f64 = 1e-6;

const NAN: Complex64 = Complex64::new(f64::NAN, f64::NAN);

/// e^z − 1 without cancellation for small |z|.
fn exp_m1(z: Complex64) -> Complex64 {
    let half = (0.5 * z.im).sin();
    let re = z.re.exp_m1() * z.im.cos() - 2.0 * half * half;
    Complex64::new(re, z.re.exp() * z.im.sin())
}

/// g(λ,τ) = 𝒦(λ)·exp(−τλ𝒦(λ)).
pub fn g_hat(k: &KernelSpec, lambda: Complex64, tau: f64) -> Result<Complex64> {
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("tau = {tau} must be >= 0")));
    }
    let kk = k.laplace_k(lambda)?;
    Ok(kk * (-(lambda * kk) * tau).exp())
}

/// ln g(λ,τ) = ln 𝒦(λ) − τλ𝒦(λ).
fn ln_g_hat(k: &KernelSpec, lambda: Complex64, tau: f64) -> Complex64 {
    match k.laplace_k(lambda) {
        Ok(kk) => kk.ln() - lambda * kk * tau,
        Err(_) => NAN,
    }
}

/// ln(1 − e^{−w}) without overflow when Re w < 0.
fn ln_one_minus_exp_neg(w: Complex64) -> Complex64 {
    if w.re >= 0.0 {
        (-exp_m1(-w)).ln()
    } else {
        -w + exp_m1(w).ln()
    }
}

/// G_t(τ) before clamping; may carry small negative inversion noise.
pub fn density_g_raw(k: &KernelSpec, t: f64, tau: f64, cfg: &InversionConfig) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("tau = {tau} must be >= 0")));
    }
    laplace::invert_log(|z| ln_g_hat(k, z, tau), t, cfg)
}

/// G_t(τ) ≥ 0. Negative noise below `MAX_CLAMP` in magnitude is clamped to 0.
pub fn density_g(k: &KernelSpec, t: f64, tau: f64, cfg: &InversionConfig) -> Result<f64> {
    let raw = density_g_raw(k, t, tau, cfg)?;
    clamp(raw, t, tau).map(|(v, _)| v)
}

fn clamp(raw: f64, t: f64, tau: f64) -> Result<(f64, f64)> {
    if raw >= 0.0 {
        Ok((raw, 0.0))
    } else if -raw <= MAX_CLAMP {
        Ok((0.0, -raw))
    } else {
        Err(Error::Inversion(format!(
            "G_t(tau) = {raw:.3e} at t = {t}, tau = {tau} is negative beyond the clamp limit"
        )))
    }
}

/// P(E_t > τ) = P(S_τ < t), from the transform e^{−τΦ(λ)}/λ.
pub fn survival_g(k: &KernelSpec, t: f64, tau: f64, cfg: &InversionConfig) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("tau = {tau} must be >= 0")));
    }
    let v = laplace::invert_log(
        |z| match k.phi(z) {
            Ok(phi) => -phi * tau - z.ln(),
            Err(_) => NAN,
        },
        t,
        cfg,
    )?;
    Ok(v.clamp(0.0, 1.0))
}

/// P(E_t ≤ τ) = ∫₀^τ G_t(u) du.
///
/// Beyond the median this is 1 − [`survival_g`]; below it the transform
/// (1 − e^{−τΦ(λ)})/λ is inverted directly to keep relative accuracy.
pub fn cdf_g(k: &KernelSpec, t: f64, tau: f64, cfg: &InversionConfig) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("tau = {tau} must be >= 0")));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let survival = survival_g(k, t, tau, cfg);
    if let Ok(s) = survival {
        if s < 0.5 {
            return Ok(1.0 - s);
        }
    }
    let direct = laplace::invert_log(
        |z| match k.phi(z) {
            Ok(phi) => ln_one_minus_exp_neg(phi * tau) - z.ln(),
            Err(_) => NAN,
        },
        t,
        cfg,
    );
    match (direct, survival) {
        (Ok(v), _) => Ok(v.clamp(0.0, 1.0)),
        (Err(_), Ok(s)) => Ok(1.0 - s),
        (Err(e), Err(_)) => Err(e),
    }
}

/// ∫₀^t G_s(τ) ds, from the transform g(λ,τ)/λ.
pub fn integrated_g(k: &KernelSpec, tau: f64, t: f64, cfg: &InversionConfig) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("tau = {tau} must be >= 0")));
    }
    laplace::invert_log(|z| ln_g_hat(k, z, tau) - z.ln(), t, cfg)
}

/// τ beyond which P(E_t > τ) < tol, from the Chernoff bound
/// P(S_τ < t) ≤ exp(λt − τΦ(λ)) minimized over λ = 2^j/t.
pub fn tail_cutoff(k: &KernelSpec, t: f64, tol: f64) -> Result<f64> {
    if !(t > 0.0) || !(tol > 0.0 && tol < 1.0) {
        return Err(Error::domain(format!("tail_cutoff needs t > 0 and tol in (0,1), got t = {t}, tol = {tol}")));
    }
    let log_tol = (1.0 / tol).ln();
    let mut best = f64::INFINITY;
    for j in -12..=12 {
        let lambda = 2f64.powi(j) / t;
        let phi = k.phi_real(lambda)?;
        if phi > 0.0 {
            best = best.min((lambda * t + log_tol) / phi);
        }
    }
    if !best.is_finite() {
        return Err(Error::Truncation(format!("no finite tail cutoff for {} at t = {t}", k.label())));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// ∫₀^{τ*} G_t(τ) dτ
    pub mass: f64,
    pub quad_error: f64,
    pub tau_star: f64,
    /// Certified upper bound on the mass beyond τ*.
    pub tail_bound: f64,
}

/// ∫₀^∞ G_t(τ) dτ by adaptive τ-quadrature truncated at the Chernoff cutoff.
pub fn normalization(k: &KernelSpec, t: f64, cfg: &InversionConfig) -> Result<f64> {
    Ok(normalization_detail(k, t, cfg, 1e-8)?.mass)
}

pub fn normalization_detail(k: &KernelSpec, t: f64, cfg: &InversionConfig, tail_tol: f64) -> Result<Normalization> {
    const TAU_MAX: f64 = 1e12;
    let tau_star = tail_cutoff(k, t, tail_tol)?;
    if tau_star > TAU_MAX {
        return Err(Error::Truncation(format!(
            "tail cutoff tau* = {tau_star:.3e} exceeds {TAU_MAX:e} for {} at t = {t}",
            k.label()
        )));
    }
    let mut failure = None;
    let res = quad::integrate_breaks(
        |tau| match density_g(k, t, tau, cfg) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &quad::geometric_breaks(tau_star / 16.0, tau_star, 2.0, 8),
        QuadOptions::with_tol(1e-10, 1e-9),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Normalization {
        mass: res.value,
        quad_error: res.abs_err,
        tau_star,
        tail_bound: tail_tol,
    })
}

/// Double transform ∬ e^{−λt−pτ} G_t(τ) dt dτ, numerically and in closed form.
///
/// The left side inverts g to G_t(τ), transforms forward in t, then
/// integrates against e^{−pτ}; the right side is 𝒦(λ)/(λ𝒦(λ) + p).
pub fn double_laplace_check(k: &KernelSpec, lambda: f64, p: f64, cfg: &InversionConfig) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && p > 0.0) {
        return Err(Error::domain(format!("lambda = {lambda} and p = {p} must be > 0")));
    }
    let kk = k.laplace_k_real(lambda)?;
    let rhs = kk / (lambda * kk + p);

    let mut failure = None;
    let mut inner = |tau: f64| -> f64 {
        if failure.is_some() {
            return 0.0;
        }
        // absolute floor: inversion noise sits near 1e-13 of the density scale
        let transformed = laplace::forward_laplace_with(
            |t| density_g(k, t, tau, cfg).unwrap_or(f64::NAN),
            lambda,
            QuadOptions {
                abs_tol: 1e-11 * rhs,
                rel_tol: 1e-8,
                max_intervals: 6000,
            },
        );
        match transformed {
            Ok(v) if v.is_finite() => (-p * tau).exp() * v,
            Ok(_) => {
                failure.get_or_insert(Error::Inversion(format!("non-finite G in t-transform at tau = {tau}")));
                0.0
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    // e^{-pτ}·g(λ,τ) ≤ e^{-(p+Φ)τ}·𝒦: cut where that is negligible
    let rate = p + lambda * kk;
    let upper = (1e-9f64).ln().abs() / rate;
    let lhs = quad::integrate(&mut inner, 0.0, upper, QuadOptions::with_tol(0.0, 1e-7))?.value;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((lhs, rhs))
}

/// G_t(τ) on a (t, τ) product grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub kernel: KernelSpec,
    pub t_values: Vec<f64>,
    pub tau_values: Vec<f64>,
    /// Row-major: `values[i * tau_values.len() + j]` is G at (t_i, τ_j).
    pub values: Vec<f64>,
    pub cfg: InversionConfig,
    /// Largest negative inversion value clamped to 0.
    pub max_clamp: f64,
}

impl DensityGrid {
    pub fn compute(kernel: &KernelSpec, t_values: &[f64], tau_values: &[f64], cfg: &InversionConfig) -> Result<Self> {
        cfg.validate()?;
        if t_values.is_empty() || t_values.iter().any(|&t| !(t > 0.0)) || t_values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("t_values must be sorted positive reals"));
        }
        if tau_values.is_empty() || tau_values.iter().any(|&x| !(x >= 0.0)) || tau_values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("tau_values must be sorted non-negative reals"));
        }
        let n_tau = tau_values.len();
        let cells: Vec<(f64, f64)> = (0..t_values.len() * n_tau)
            .into_par_iter()
            .map(|idx| {
                let (t, tau) = (t_values[idx / n_tau], tau_values[idx % n_tau]);
                density_g_raw(kernel, t, tau, cfg).and_then(|raw| clamp(raw, t, tau))
            })
            .collect::<Result<_>>()?;
        let max_clamp = cells.iter().fold(0.0f64, |m, c| m.max(c.1));
        Ok(DensityGrid {
            kernel: kernel.clone(),
            t_values: t_values.to_vec(),
            tau_values: tau_values.to_vec(),
            values: cells.into_iter().map(|c| c.0).collect(),
            cfg: *cfg,
            max_clamp,
        })
    }

    pub fn get(&self, i_t: usize, j_tau: usize) -> f64 {
        self.values[i_t * self.tau_values.len() + j_tau]
    }

    pub fn row(&self, i_t: usize) -> &[f64] {
        let n = self.tau_values.len();
        &self.values[i_t * n..(i_t + 1) * n]
    }

    /// Trapezoid mass of each t-row over the τ grid, plus the Chernoff bound
    /// on the mass beyond the last τ.
    pub fn row_masses(&self) -> Result<Vec<(f64, f64)>> {
        let last = *self.tau_values.last().expect("grid has tau values");
        self.t_values
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let row = self.row(i);
                let trap: f64 = self
                    .tau_values
                    .windows(2)
                    .zip(row.windows(2))
                    .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
                    .sum();
                Ok((trap, chernoff_tail(&self.kernel, t, last)?))
            })
            .collect()
    }

    /// CSV with header `t,tau,G`, rows ordered by t then τ.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,tau,G")?;
        for (i, &t) in self.t_values.iter().enumerate() {
            for (j, &tau) in self.tau_values.iter().enumerate() {
                writeln!(out, "{t:.16e},{tau:.16e},{:.16e}", self.get(i, j))?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        crate::io::write_atomic(path, &buf)
    }
}

/// min over λ = 2^j/t of exp(λt − τΦ(λ)), an upper bound on P(E_t > τ).
pub fn chernoff_tail(k: &KernelSpec, t: f64, tau: f64) -> Result<f64> {
    let mut best: f64 = 1.0;
    for j in -12..=12 {
        let lambda = 2f64.powi(j) / t;
        best = best.min((lambda * t - tau * k.phi_real(lambda)?).exp());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn stable_half_closed(t: f64, tau: f64) -> f64 {
        (PI * t).powf(-0.5) * (-tau * tau / (4.0 * t)).exp()
    }

    #[test]
    fn g_hat_examples() {
        let s = KernelSpec::stable(0.5).unwrap();
        let c = |x: f64| Complex64::new(x, 0.0);
        assert!(rel(g_hat(&s, c(1.0), 1.0).unwrap().re, (-1.0f64).exp()) < 1e-15);
        assert!(rel(g_hat(&s, c(4.0), 1.0).unwrap().re, 0.5 * (-2.0f64).exp()) < 1e-15);
        let g = KernelSpec::gamma(1.0, 1.0).unwrap();
        assert_eq!(g_hat(&g, c(3.0), 0.0).unwrap(), g.laplace_k(c(3.0)).unwrap());
        assert!(matches!(g_hat(&s, c(-1.0), 1.0), Err(Error::BranchCut { .. })));
    }

    #[test]
    fn density_examples() {
        let s = KernelSpec::stable(0.5).unwrap();
        let cfg = InversionConfig::default();
        assert!(rel(density_g(&s, 1.0, 0.0, &cfg).unwrap(), 1.0 / PI.sqrt()) < 1e-9);
        assert!(rel(density_g(&s, 1.0, 2.0, &cfg).unwrap(), (-1.0f64).exp() / PI.sqrt()) < 1e-9);
        assert!(matches!(density_g(&s, 0.0, 1.0, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn stable_half_matches_closed_form() {
        let s = KernelSpec::stable(0.5).unwrap();
        let cfg = InversionConfig::default();
        for t in [0.5, 1.0, 2.0] {
            for i in 0..=50 {
                let tau = 0.1 * i as f64;
                let exact = stable_half_closed(t, tau);
                let v = density_g(&s, t, tau, &cfg).unwrap();
                assert!(rel(v, exact) < 1e-6, "t={t} tau={tau}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn cdf_and_integrated_examples() {
        let s = KernelSpec::stable(0.5).unwrap();
        let cfg = InversionConfig::default();
        // P(E_1 ≤ τ) = erf(τ/2) for α = 1/2
        for tau in [0.1, 1.0, 3.0] {
            let v = cdf_g(&s, 1.0, tau, &cfg).unwrap();
            assert!(rel(v, crate::specfun::erf(tau / 2.0)) < 1e-8, "tau={tau}");
        }
        let v = integrated_g(&s, 0.0, 1.0, &cfg).unwrap();
        assert!(rel(v, 2.0 / PI.sqrt()) < 1e-9);
        let tiny = integrated_g(&s, 1.0, 1e-6, &cfg).unwrap();
        assert!(tiny.abs() < 1e-12);
    }

    #[test]
    fn survival_tail_keeps_relative_accuracy() {
        let s = KernelSpec::stable(0.5).unwrap();
        let cfg = InversionConfig::default();
        for (t, tau) in [(1.0, 1.0), (1.0, 8.0), (0.1, 2.0)] {
            let exact = crate::specfun::erfc(tau / (2.0 * f64::sqrt(t)));
            let v = survival_g(&s, t, tau, &cfg).unwrap();
            assert!(rel(v, exact) < 1e-7, "t={t} tau={tau}: {v} vs {exact}");
            assert!((cdf_g(&s, t, tau, &cfg).unwrap() + v - 1.0).abs() < 1e-12);
        }
        let steep = KernelSpec::stable(0.94).unwrap();
        assert_eq!(density_g(&steep, 0.1, 1.0, &cfg).unwrap(), 0.0);
        assert_eq!(cdf_g(&steep, 0.1, 1.0, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn normalization_examples() {
        let cfg = InversionConfig::default();
        let s = KernelSpec::stable(0.5).unwrap();
        assert!((normalization(&s, 1.0, &cfg).unwrap() - 1.0).abs() < 1e-6);
        let s8 = KernelSpec::stable(0.8).unwrap();
        assert!((normalization(&s8, 10.0, &cfg).unwrap() - 1.0).abs() < 1e-4);
        let ig = KernelSpec::inverse_gaussian(1.0, 1.0).unwrap();
        assert!((normalization(&ig, 1.0, &cfg).unwrap() - 1.0).abs() < 1e-4);
        let g = KernelSpec::gamma(1.0, 1.0).unwrap();
        assert!((normalization(&g, 1.0, &cfg).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn double_laplace_examples() {
        let cfg = InversionConfig::default();
        let s = KernelSpec::stable(0.5).unwrap();
        let (lhs, rhs) = double_laplace_check(&s, 1.0, 1.0, &cfg).unwrap();
        assert!(rel(rhs, 0.5) < 1e-15);
        assert!(rel(lhs, rhs) < 1e-4, "{lhs} vs {rhs}");
        let g = KernelSpec::gamma(1.0, 1.0).unwrap();
        let (_, rhs) = double_laplace_check(&g, 1.0, 1.0, &cfg).unwrap();
        assert!(rel(rhs, std::f64::consts::LN_2 / (1.0 + std::f64::consts::LN_2)) < 1e-15);
        let (_, rhs) = double_laplace_check(&s, 2.0, 1e-12, &cfg).unwrap();
        assert!(rel(rhs, 0.5) < 1e-9);
    }

    #[test]
    fn mass_moves_right_as_t_grows() {
        let cfg = InversionConfig::default();
        for k in [KernelSpec::stable(0.7).unwrap(), KernelSpec::gamma(1.0, 1.0).unwrap()] {
            for tau in [0.5, 2.0] {
                let cdfs: Vec<f64> = [0.2, 0.5, 1.0, 2.0, 5.0]
                    .iter()
                    .map(|&t| cdf_g(&k, t, tau, &cfg).unwrap())
                    .collect();
                assert!(cdfs.windows(2).all(|w| w[1] <= w[0] + 1e-10), "{} {cdfs:?}", k.label());
            }
        }
    }

    #[test]
    fn cesaro_mean_of_g_is_bounded_by_that_of_k() {
        let cfg = InversionConfig::default();
        for k in [KernelSpec::stable(0.5).unwrap(), KernelSpec::gamma(1.0, 2.0).unwrap()] {
            for t in [0.5, 5.0, 50.0] {
                let bound = k.cumulative_kernel(t).unwrap();
                for tau in [0.0, 0.3, 1.0, 4.0] {
                    let v = integrated_g(&k, tau, t, &cfg).unwrap();
                    assert!(v <= bound * (1.0 + 1e-6), "{} t={t} tau={tau}", k.label());
                }
            }
        }
    }

    #[test]
    fn grid_fill_and_csv() {
        let s = KernelSpec::stable(0.5).unwrap();
        let taus: Vec<f64> = (0..=200).map(|i| 0.05 * i as f64).collect();
        let grid = DensityGrid::compute(&s, &[0.5, 1.0], &taus, &InversionConfig::default()).unwrap();
        assert_eq!(grid.values.len(), 2 * taus.len());
        assert!(rel(grid.get(1, 40), stable_half_closed(1.0, 2.0)) < 1e-8);
        for (trap, tail) in grid.row_masses().unwrap() {
            assert!((trap - 1.0).abs() < 1e-3 + tail);
        }
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,tau,G"));
        assert_eq!(text.lines().count(), 1 + 2 * taus.len());
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first[..2], [0.5, 0.0]);
        assert!(DensityGrid::compute(&s, &[1.0, 0.5], &taus, &InversionConfig::default()).is_err());
    }

    #[test]
    fn gaver_stehfest_config_agrees_on_densities() {
        let s = KernelSpec::stable(0.5).unwrap();
        let gs = InversionConfig::gaver_stehfest(16);
        for tau in [0.0, 0.5, 1.0] {
            let v = density_g(&s, 1.0, tau, &gs).unwrap();
            assert!(rel(v, stable_half_closed(1.0, tau)) < 1e-4, "tau={tau}");
        }
    }
}
