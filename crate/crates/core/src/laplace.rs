//! Forward Laplace transforms by quadrature and two independent inversion
//! algorithms: the fixed Talbot contour (complex nodes) and Gaver–Stehfest
//! (real nodes only).

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionMethod {
    Talbot,
    GaverStehfest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    pub method: InversionMethod,
    /// Talbot node count M, or Gaver–Stehfest term count N.
    pub order: usize,
    pub target_rel_tol: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig::talbot(32)
    }
}

impl InversionConfig {
    pub fn talbot(order: usize) -> Self {
        InversionConfig {
            method: InversionMethod::Talbot,
            order,
            target_rel_tol: 1e-8,
        }
    }

    pub fn gaver_stehfest(order: usize) -> Self {
        InversionConfig {
            method: InversionMethod::GaverStehfest,
            order,
            target_rel_tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            InversionMethod::Talbot if !(16..=128).contains(&self.order) => Err(Error::param(format!(
                "talbot order {} outside [16, 128]",
                self.order
            ))),
            InversionMethod::GaverStehfest if !(8..=20).contains(&self.order) || !self.order.is_multiple_of(2) => {
                Err(Error::param(format!(
                    "gaver_stehfest order {} must be even and in [8, 20]",
                    self.order
                )))
            }
            _ if !(self.target_rel_tol > 0.0) => Err(Error::param("target_rel_tol must be > 0")),
            _ => Ok(()),
        }
    }
}

/// Fixed-Talbot inversion (Abate–Valkó) with `m` nodes.
///
/// The contour `s(θ) = rθ(cot θ + i)`, `r = 2m/(5t)`, wraps the negative real
/// axis, so `transform` must be analytic off (−∞, 0].
pub fn talbot<F>(transform: F, t: f64, m: usize) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    talbot_sum(|s| (s * t).exp() * transform(s), m, 2.0 * m as f64 / (5.0 * t))
}

/// Fixed Talbot for a transform given by its logarithm, summing
/// `exp(st + ln F(s))` so the two factors never overflow separately.
///
/// The radius starts at `2m/(5t)` and moves right to the real-axis minimiser
/// of `rt + ln F(r)` when that lies beyond it. Transforms such as
/// `e^{−τλ^α}` with `τ ≫ t^α` have their saddle far to the right, and a
/// contour left of it loses the answer to cancellation.
///
/// Returns 0 when `rt + ln F(r)` drops below the `f64` underflow threshold
/// on the real axis.
pub fn talbot_log<F>(log_transform: F, t: f64, m: usize) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    let r = talbot_radius(&log_transform, t, m);
    if r * t + log_transform(Complex64::new(r, 0.0)).re < UNDERFLOW_LN {
        return 0.0;
    }
    talbot_sum(|s| (s * t + log_transform(s)).exp(), m, r)
}

/// ln of the smallest positive subnormal, minus a safety margin.
const UNDERFLOW_LN: f64 = -760.0;

/// Contour radius used by [`talbot_log`].
pub fn talbot_radius<F>(log_transform: F, t: f64, m: usize) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    const GROWTH: f64 = 1.25;
    const MAX_STEPS: usize = 80;
    let score = |r: f64| r * t + log_transform(Complex64::new(r, 0.0)).re;
    let r0 = 2.0 * m as f64 / (5.0 * t);
    let mut best = (r0, score(r0));
    if !best.1.is_finite() {
        return r0;
    }
    for _ in 0..MAX_STEPS {
        let r = best.0 * GROWTH;
        let s = score(r);
        if !(s < best.1) {
            break;
        }
        best = (r, s);
    }
    best.0
}

/// `integrand(s)` is `e^{st}F(s)`.
fn talbot_sum(integrand: impl Fn(Complex64) -> Complex64, m: usize, r: f64) -> f64 {
    let mut sum = 0.5 * integrand(Complex64::new(r, 0.0)).re;
    for k in 1..m {
        let theta = k as f64 * PI / m as f64;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        sum += (integrand(s) * Complex64::new(1.0, sigma)).re;
    }
    r / m as f64 * sum
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn factorial(n: i128) -> i128 {
    (1..=n).product::<i128>().max(1)
}

/// Gaver–Stehfest weights V_1..V_N, accumulated as exact rationals.
pub fn stehfest_weights(n: usize) -> Vec<f64> {
    assert!(n.is_multiple_of(2) && n <= 20, "Stehfest order must be even and <= 20");
    let half = (n / 2) as i128;
    (1..=n as i128)
        .map(|k| {
            let (mut num, mut den) = (0i128, 1i128);
            for j in (k + 1) / 2..=k.min(half) {
                let tnum = j.pow(half as u32) * factorial(2 * j);
                let tden = factorial(half - j) * factorial(j) * factorial(j - 1) * factorial(k - j) * factorial(2 * j - k);
                let g = gcd(tnum, tden);
                let (tnum, tden) = (tnum / g, tden / g);
                let l = den / gcd(den, tden) * tden;
                num = num * (l / den) + tnum * (l / tden);
                den = l;
                let g = gcd(num, den).max(1);
                num /= g;
                den /= g;
            }
            let sign = if (half + k) % 2 == 0 { 1.0 } else { -1.0 };
            sign * (num as f64 / den as f64)
        })
        .collect()
}

fn cached_stehfest(n: usize) -> &'static [f64] {
    static CACHE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    let all = CACHE.get_or_init(|| (0..=20).map(|k| if k % 2 == 0 && k >= 2 { stehfest_weights(k) } else { Vec::new() }).collect());
    &all[n]
}

/// Gaver–Stehfest inversion with `n` terms, using real nodes only.
pub fn gaver_stehfest<F>(transform: F, t: f64, n: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let weights = cached_stehfest(n);
    let a = LN_2 / t;
    weights
        .iter()
        .enumerate()
        .map(|(i, v)| v * transform((i + 1) as f64 * a))
        .sum::<f64>()
        * a
}

/// Inverse Laplace transform at `t` using the configured method.
pub fn invert<F>(transform: F, t: f64, cfg: &InversionConfig) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("inversion time t = {t} must be > 0")));
    }
    cfg.validate()?;
    let v = match cfg.method {
        InversionMethod::Talbot => talbot(&transform, t, cfg.order),
        InversionMethod::GaverStehfest => gaver_stehfest(|x| transform(Complex64::new(x, 0.0)).re, t, cfg.order),
    };
    if !v.is_finite() {
        return Err(Error::Inversion(format!("non-finite result at t = {t}")));
    }
    Ok(v)
}

/// [`invert`] for a transform supplied as `ln F`.
pub fn invert_log<F>(log_transform: F, t: f64, cfg: &InversionConfig) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("inversion time t = {t} must be > 0")));
    }
    cfg.validate()?;
    let v = match cfg.method {
        InversionMethod::Talbot => talbot_log(&log_transform, t, cfg.order),
        InversionMethod::GaverStehfest => {
            gaver_stehfest(|x| log_transform(Complex64::new(x, 0.0)).exp().re, t, cfg.order)
        }
    };
    if !v.is_finite() {
        return Err(Error::Inversion(format!("non-finite result at t = {t}")));
    }
    Ok(v)
}

/// Runs both Talbot (M=32) and Gaver–Stehfest (N=16) and returns the Talbot
/// value, failing when the two disagree by more than `100·target_rel_tol`.
pub fn invert_checked<F>(transform: F, t: f64, target_rel_tol: f64) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    let a = invert(&transform, t, &InversionConfig::talbot(32))?;
    let b = invert(&transform, t, &InversionConfig::gaver_stehfest(16))?;
    let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    if (a - b).abs() > 100.0 * target_rel_tol * scale {
        return Err(Error::Inversion(format!(
            "talbot {a:.12e} vs gaver-stehfest {b:.12e} at t = {t}"
        )));
    }
    Ok(a)
}

/// ∫₀^∞ e^{−λt} f(t) dt by adaptive quadrature.
///
/// The range is split at 1/λ; below it, geometric breakpoints resolve an
/// integrable t^{−β} singularity at the origin, above it the integral is cut
/// where e^{−λt} drops below `tol` relative to the accumulated value.
pub fn forward_laplace<F>(f: F, lambda: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    forward_laplace_with(
        f,
        lambda,
        QuadOptions {
            abs_tol: 0.0,
            rel_tol: tol,
            max_intervals: 6000,
        },
    )
}

/// As [`forward_laplace`], with explicit absolute and relative tolerances.
pub fn forward_laplace_with<F>(f: F, lambda: f64, opts: QuadOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("forward_laplace: lambda = {lambda} must be > 0")));
    }
    let tol = opts.rel_tol;
    let scale = 1.0 / lambda;
    // e^{-λt} < tol·1e-3 beyond this point
    let upper = scale * ((1.0 / tol).ln() + 7.0).max(10.0);
    let breaks = quad::geometric_breaks(scale, upper, 4.0, 30);
    let g = |t: f64| (-lambda * t).exp() * f(t);
    let head = quad::integrate_breaks(g, &breaks, opts)?;
    // extend the tail while the last stretch still matters
    let mut total = head.value;
    let mut lo = upper;
    for _ in 0..60 {
        let hi = 2.0 * lo;
        let piece = quad::integrate(g, lo, hi, opts)?.value;
        total += piece;
        if piece.abs() <= (tol * total.abs() * 1e-2).max(opts.abs_tol) {
            return Ok(total);
        }
        lo = hi;
    }
    Err(Error::Quadrature(format!(
        "forward_laplace tail did not decay (lambda = {lambda})"
    )))
}
