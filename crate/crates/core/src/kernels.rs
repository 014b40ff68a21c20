//! Memory kernels k(t), their Laplace transforms 𝒦(λ) and Laplace exponents
//! Φ(λ) = λ𝒦(λ), asymptotic classification, and numerical admissibility checks.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace;
use crate::quad::{self, QuadOptions};
use crate::specfun::{self, gamma};

/// Weight μ(α) ≥ 0 on [0, 1] of a distributed-order kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum OrderWeight {
    /// μ ≡ value
    Constant { value: f64 },
    /// μ(α) = a·α^s
    Power { a: f64, s: f64 },
    /// μ(α) = Σ coeffs[i]·α^i
    Polynomial { coeffs: Vec<f64> },
    /// Samples on a strictly increasing grid from 0 to 1, linearly interpolated.
    Tabulated { alpha: Vec<f64>, mu: Vec<f64> },
}

impl OrderWeight {
    pub fn eval(&self, alpha: f64) -> f64 {
        match self {
            OrderWeight::Constant { value } => *value,
            OrderWeight::Power { a, s } => a * alpha.powf(*s),
            OrderWeight::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * alpha + c),
            OrderWeight::Tabulated { alpha: xs, mu } => {
                let i = xs.partition_point(|&x| x <= alpha).clamp(1, xs.len() - 1);
                let (x0, x1) = (xs[i - 1], xs[i]);
                let w = ((alpha - x0) / (x1 - x0)).clamp(0.0, 1.0);
                mu[i - 1] * (1.0 - w) + mu[i] * w
            }
        }
    }

    /// Quadrature nodes α_i and weights w_i·μ(α_i) for ∫₀¹ f(α)μ(α) dα.
    ///
    /// Smooth forms use the 64-point Gauss–Legendre rule; tables use a Gauss
    /// rule on every segment so the interpolation kinks are integrated exactly.
    pub fn alpha_rule(&self) -> Vec<(f64, f64)> {
        match self {
            OrderWeight::Tabulated { alpha, .. } => {
                let segs = alpha.len() - 1;
                let rule = quad::legendre_unit((64 / segs).clamp(8, 64));
                alpha
                    .windows(2)
                    .flat_map(|w| {
                        let h = w[1] - w[0];
                        rule.nodes.iter().zip(&rule.weights).map(move |(x, wt)| (w[0] + h * x, h * wt))
                    })
                    .map(|(al, wt)| (al, wt * self.eval(al)))
                    .collect()
            }
            _ => {
                let rule = quad::legendre64_unit();
                rule.nodes.iter().zip(&rule.weights).map(|(&al, &wt)| (al, wt * self.eval(al))).collect()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            OrderWeight::Constant { value } if !(*value > 0.0) || !value.is_finite() => {
                return Err(Error::param(format!("constant weight must be > 0, got {value}")))
            }
            OrderWeight::Power { a, s } if !(*a > 0.0 && *s >= 0.0) || !a.is_finite() || !s.is_finite() => {
                return Err(Error::param(format!("power weight needs a > 0, s >= 0 (a = {a}, s = {s})")))
            }
            OrderWeight::Polynomial { coeffs } if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) => {
                return Err(Error::param("polynomial weight needs finite coefficients"))
            }
            OrderWeight::Tabulated { alpha, mu } => {
                if alpha.len() < 2 || alpha.len() != mu.len() {
                    return Err(Error::param("tabulated weight needs >= 2 matching alpha/mu samples"));
                }
                if alpha[0] != 0.0 || alpha[alpha.len() - 1] != 1.0 || alpha.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::param("tabulated alpha must increase strictly from 0 to 1"));
                }
                if mu.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
                    return Err(Error::param("tabulated mu must be finite and >= 0"));
                }
            }
            _ => {}
        }
        let samples: Vec<f64> = (0..=1000).map(|i| self.eval(i as f64 / 1000.0)).collect();
        if samples.iter().any(|&m| m < 0.0) {
            return Err(Error::param("distributed-order weight is negative somewhere on [0, 1]"));
        }
        if samples.iter().all(|&m| m == 0.0) {
            return Err(Error::param("distributed-order weight vanishes identically"));
        }
        Ok(())
    }

    fn classify(&self) -> Result<KernelClass> {
        match self {
            OrderWeight::Constant { value } => Ok(KernelClass::C2 { mu0: *value }),
            OrderWeight::Power { a, s } if *s == 0.0 => Ok(KernelClass::C2 { mu0: *a }),
            OrderWeight::Power { a, s } => Ok(KernelClass::C3 {
                s: *s,
                c: a * gamma(1.0 + s),
            }),
            OrderWeight::Polynomial { coeffs } => {
                let (i, c) = coeffs
                    .iter()
                    .enumerate()
                    .find(|(_, c)| **c != 0.0)
                    .map(|(i, c)| (i, *c))
                    .expect("validated weight is not identically zero");
                if i == 0 {
                    Ok(KernelClass::C2 { mu0: c })
                } else {
                    let s = i as f64;
                    Ok(KernelClass::C3 { s, c: c * gamma(1.0 + s) })
                }
            }
            OrderWeight::Tabulated { alpha, mu } => {
                if mu[0] > 0.0 {
                    Ok(KernelClass::C2 { mu0: mu[0] })
                } else if mu[1] > 0.0 {
                    // linear interpolation gives μ(α) = (μ₁/α₁)·α near 0
                    let a = mu[1] / alpha[1];
                    Ok(KernelClass::C3 { s: 1.0, c: a })
                } else {
                    Err(Error::Unclassifiable(format!(
                        "tabulated weight vanishes on [0, {}], so 𝒦 grows like a power of 1/λ times a log factor",
                        alpha[1]
                    )))
                }
            }
        }
    }
}

/// Lévy density ϕ(r) = C·r^{θ−1} + ψ(r) with
/// ψ(r) = psi_scale·r^{θ−1+δ}·(1+r)^{−(θ−1+δ+ε)}.
///
/// ψ is bounded by r^{θ−1+δ} near 0 and by r^{−ε} at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StieltjesPhi {
    pub c: f64,
    pub theta: f64,
    #[serde(default)]
    pub psi_scale: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl StieltjesPhi {
    fn validate(&self) -> Result<()> {
        let StieltjesPhi {
            c,
            theta,
            psi_scale,
            delta,
            epsilon,
        } = *self;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param(format!("stieltjes C must be > 0, got {c}")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::param(format!("stieltjes theta must lie in (0, 1), got {theta}")));
        }
        if !(delta > 0.0 && delta < 1.0 - theta) {
            return Err(Error::param(format!("stieltjes delta must lie in (0, 1 - theta), got {delta}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param(format!("stieltjes epsilon must be > 0, got {epsilon}")));
        }
        if !(psi_scale >= 0.0 && psi_scale.is_finite()) {
            return Err(Error::param(format!("stieltjes psi_scale must be >= 0, got {psi_scale}")));
        }
        Ok(())
    }

    pub fn psi(&self, r: f64) -> f64 {
        if self.psi_scale == 0.0 {
            return 0.0;
        }
        let e0 = self.theta - 1.0 + self.delta;
        self.psi_scale * r.powf(e0) * (1.0 + r).powf(-(e0 + self.epsilon))
    }

    pub fn density(&self, r: f64) -> f64 {
        self.c * r.powf(self.theta - 1.0) + self.psi(r)
    }

    /// ∫₀^∞ ψ(r)·w(r) dr for a weight w bounded by 1 near the origin.
    fn psi_integral<T, W>(&self, center: f64, weight: W) -> Result<T>
    where
        T: quad::QuadValue,
        W: Fn(f64) -> T,
    {
        let tol: f64 = 1e-13;
        let below = (1.0 / tol).ln() / (self.theta + self.delta) + 2.0;
        // the weight may add decay of its own; ψ alone decays like r^{-ε}
        let above = ((1.0 / tol).ln() / self.epsilon).min(600.0 - center.ln().max(0.0)) + 2.0;
        let opts = QuadOptions::with_tol(0.0, 1e-11);
        Ok(quad::integrate_log_axis(|r| weight(r) * self.psi(r), center, below, above, opts)?.value)
    }
}

/// An admissible memory kernel, identified by its subordinator family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
pub enum KernelSpec {
    Stable {
        alpha: f64,
    },
    #[serde(rename = "gamma")]
    GammaSub {
        a: f64,
        b: f64,
    },
    InverseGaussian {
        a: f64,
        b: f64,
    },
    DistributedOrder {
        mu: OrderWeight,
    },
    #[serde(rename = "stieltjes")]
    StieltjesDensity {
        phi: StieltjesPhi,
    },
}

/// Asymptotic class of 𝒦 at λ → 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum KernelClass {
    /// 𝒦(λ) = λ^{θ−1}
    C1 { theta: f64 },
    /// 𝒦(λ) ∼ μ₀ λ^{−1} log(1/λ)^{−1}
    C2 { mu0: f64 },
    /// 𝒦(λ) ∼ c λ^{−1} log(1/λ)^{−1−s}
    C3 { s: f64, c: f64 },
}

impl fmt::Display for KernelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelClass::C1 { theta } => write!(f, "C1(theta={theta})"),
            KernelClass::C2 { mu0 } => write!(f, "C2(mu0={mu0})"),
            KernelClass::C3 { s, c } => write!(f, "C3(s={s}, c={c})"),
        }
    }
}

/// Whether the class holds for all λ or only as λ → 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassOrigin {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: KernelClass,
    pub origin: ClassOrigin,
}

fn check_branch(lambda: Complex64) -> Result<()> {
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::domain(format!("lambda = {lambda} is not finite")));
    }
    if lambda.im == 0.0 && lambda.re <= 0.0 {
        return Err(Error::BranchCut {
            re: lambda.re,
            im: lambda.im,
        });
    }
    Ok(())
}

/// ln(1 + z) without cancellation for small |z|.
fn ln_1p(z: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * z.re + z.re * z.re + z.im * z.im).ln_1p();
    let im = z.im.atan2(1.0 + z.re);
    Complex64::new(re, im)
}

impl KernelSpec {
    pub fn stable(alpha: f64) -> Result<Self> {
        let k = KernelSpec::Stable { alpha };
        k.validate()?;
        Ok(k)
    }

    pub fn gamma(a: f64, b: f64) -> Result<Self> {
        let k = KernelSpec::GammaSub { a, b };
        k.validate()?;
        Ok(k)
    }

    pub fn inverse_gaussian(a: f64, b: f64) -> Result<Self> {
        let k = KernelSpec::InverseGaussian { a, b };
        k.validate()?;
        Ok(k)
    }

    pub fn distributed_order(mu: OrderWeight) -> Result<Self> {
        let k = KernelSpec::DistributedOrder { mu };
        k.validate()?;
        Ok(k)
    }

    pub fn stieltjes(phi: StieltjesPhi) -> Result<Self> {
        let k = KernelSpec::StieltjesDensity { phi };
        k.validate()?;
        Ok(k)
    }

    /// Parses and validates a kernel from its JSON form.
    pub fn from_json(text: &str) -> Result<Self> {
        let k: KernelSpec = serde_json::from_str(text)?;
        k.validate()?;
        Ok(k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("kernel specs always serialize")
    }

    /// Short label used in file names and reports.
    pub fn label(&self) -> String {
        match self {
            KernelSpec::Stable { alpha } => format!("stable(alpha={alpha})"),
            KernelSpec::GammaSub { a, b } => format!("gamma(a={a},b={b})"),
            KernelSpec::InverseGaussian { a, b } => format!("inverse_gaussian(a={a},b={b})"),
            KernelSpec::DistributedOrder { mu } => match mu {
                OrderWeight::Constant { value } => format!("distributed_order(mu={value})"),
                OrderWeight::Power { a, s } => format!("distributed_order(mu={a}*alpha^{s})"),
                OrderWeight::Polynomial { coeffs } => format!("distributed_order(mu=poly{coeffs:?})"),
                OrderWeight::Tabulated { alpha, .. } => format!("distributed_order(mu=table[{}])", alpha.len()),
            },
            KernelSpec::StieltjesDensity { phi } => format!("stieltjes(c={},theta={})", phi.c, phi.theta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Stable { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::param(format!("stable alpha must lie in (0, 1), got {alpha}")));
                }
            }
            KernelSpec::GammaSub { a, b } => {
                if !(*a > 0.0 && *b > 0.0) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::param(format!("gamma kernel needs a, b > 0 (a = {a}, b = {b})")));
                }
            }
            KernelSpec::InverseGaussian { a, b } => {
                if !(*a >= 0.0 && *b > 0.0) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::param(format!(
                        "inverse-Gaussian kernel needs a >= 0, b > 0 (a = {a}, b = {b})"
                    )));
                }
            }
            KernelSpec::DistributedOrder { mu } => mu.validate()?,
            KernelSpec::StieltjesDensity { phi } => phi.validate()?,
        }
        Ok(())
    }

    /// Pointwise kernel k(t), t > 0.
    pub fn eval_kernel(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("kernel evaluated at t = {t}; need t > 0")));
        }
        Ok(match self {
            KernelSpec::Stable { alpha } => t.powf(-alpha) / gamma(1.0 - alpha),
            KernelSpec::GammaSub { a, b } => a * specfun::exp_integral_e1(b * t)?,
            KernelSpec::InverseGaussian { a, b } => inverse_gaussian_kernel(*a, *b, t),
            KernelSpec::DistributedOrder { mu } => mu
                .alpha_rule()
                .into_iter()
                .map(|(al, w)| w * t.powf(-al) / gamma(1.0 - al))
                .sum(),
            KernelSpec::StieltjesDensity { phi } => {
                let head = phi.c * gamma(phi.theta) * t.powf(-phi.theta);
                head + phi.psi_integral(1.0 / t, |r| (-r * t).exp())?
            }
        })
    }

    /// Laplace transform 𝒦(λ) on ℂ ∖ (−∞, 0], principal branches.
    pub fn laplace_k(&self, lambda: Complex64) -> Result<Complex64> {
        check_branch(lambda)?;
        Ok(match self {
            KernelSpec::Stable { alpha } => (lambda.ln() * (alpha - 1.0)).exp(),
            KernelSpec::GammaSub { a, b } => ln_1p(lambda / *b) * *a / lambda,
            KernelSpec::InverseGaussian { a, b } => {
                // (√b/λ)(√(2λ+a) − √a), rationalized
                2.0 * b.sqrt() / ((2.0 * lambda + *a).sqrt() + a.sqrt())
            }
            KernelSpec::DistributedOrder { mu } => {
                let ln = lambda.ln();
                mu.alpha_rule()
                    .into_iter()
                    .fold(Complex64::new(0.0, 0.0), |acc, (al, w)| acc + (ln * (al - 1.0)).exp() * w)
            }
            KernelSpec::StieltjesDensity { phi } => {
                let head = (lambda.ln() * (phi.theta - 1.0)).exp() * (phi.c * PI / (PI * phi.theta).sin());
                let center = lambda.norm();
                head + phi.psi_integral(center, |r| Complex64::new(1.0, 0.0) / (lambda + r))?
            }
        })
    }

    /// Laplace exponent Φ(λ) = λ𝒦(λ).
    pub fn phi(&self, lambda: Complex64) -> Result<Complex64> {
        if let KernelSpec::Stable { alpha } = self {
            check_branch(lambda)?;
            return Ok((lambda.ln() * *alpha).exp());
        }
        Ok(lambda * self.laplace_k(lambda)?)
    }

    pub fn laplace_k_real(&self, lambda: f64) -> Result<f64> {
        Ok(self.laplace_k(Complex64::new(lambda, 0.0))?.re)
    }

    pub fn phi_real(&self, lambda: f64) -> Result<f64> {
        Ok(self.phi(Complex64::new(lambda, 0.0))?.re)
    }

    pub fn classify(&self) -> Result<KernelClass> {
        Ok(self.classify_with_origin()?.class)
    }

    pub fn classify_with_origin(&self) -> Result<Classification> {
        match self {
            KernelSpec::Stable { alpha } => Ok(Classification {
                class: KernelClass::C1 { theta: *alpha },
                origin: ClassOrigin::Exact,
            }),
            KernelSpec::StieltjesDensity { phi } => Ok(Classification {
                class: KernelClass::C1 { theta: phi.theta },
                origin: ClassOrigin::Asymptotic,
            }),
            KernelSpec::DistributedOrder { mu } => Ok(Classification {
                class: mu.classify()?,
                origin: ClassOrigin::Asymptotic,
            }),
            KernelSpec::GammaSub { .. } | KernelSpec::InverseGaussian { .. } => {
                let probe: Vec<String> = [1e-4, 1e-6, 1e-8]
                    .iter()
                    .map(|&l| match self.laplace_k_real(l) {
                        Ok(v) => format!("K({l:e}) = {v:.6}"),
                        Err(e) => format!("K({l:e}) failed: {e}"),
                    })
                    .collect();
                Err(Error::Unclassifiable(format!(
                    "{} has K(lambda) tending to a finite constant as lambda -> 0 ({})",
                    self.label(),
                    probe.join(", ")
                )))
            }
        }
    }

    /// ∫₀^T k(s) ds.
    pub fn cumulative_kernel(&self, upper: f64) -> Result<f64> {
        if !(upper >= 0.0) || !upper.is_finite() {
            return Err(Error::domain(format!("cumulative kernel upper limit {upper} must be >= 0")));
        }
        if upper == 0.0 {
            return Ok(0.0);
        }
        match self {
            KernelSpec::Stable { alpha } => Ok(upper.powf(1.0 - alpha) / gamma(2.0 - alpha)),
            KernelSpec::GammaSub { a, b } => {
                let x = b * upper;
                Ok(a * (upper * specfun::exp_integral_e1(x)? - (-x).exp_m1() / b))
            }
            KernelSpec::DistributedOrder { mu } => Ok(mu
                .alpha_rule()
                .into_iter()
                .map(|(al, w)| w * upper.powf(1.0 - al) / gamma(2.0 - al))
                .sum()),
            KernelSpec::StieltjesDensity { phi } => {
                let head = phi.c * gamma(phi.theta) * upper.powf(1.0 - phi.theta) / (1.0 - phi.theta);
                // ∫₀^T e^{-rt} dt = (1 − e^{−rT})/r
                let tail = phi.psi_integral(1.0 / upper, |r| -(-r * upper).exp_m1() / r)?;
                Ok(head + tail)
            }
            KernelSpec::InverseGaussian { .. } => {
                let transform = |z: Complex64| self.laplace_k(z).unwrap_or(Complex64::new(f64::NAN, 0.0)) / z;
                laplace::invert(transform, upper, &laplace::InversionConfig::default())
            }
        }
    }

    /// Numerical check of the limit hypotheses on 𝒦 and Φ and of the two
    /// admissibility conditions.
    pub fn check_admissible(&self, cfg: &AdmissibilityConfig) -> Result<AdmissibilityReport> {
        cfg.validate()?;
        let grid = &cfg.lambda_grid;
        let lo = *grid.last().expect("validated grid is non-empty");
        let evaluate = |l: f64| -> Result<(f64, f64)> { Ok((self.laplace_k_real(l)?, self.phi_real(l)?)) };
        let toward_zero: Result<Vec<(f64, f64)>> = grid.iter().map(|&l| evaluate(l)).collect();
        let toward_inf: Result<Vec<(f64, f64)>> = grid.iter().map(|&l| evaluate(1.0 / l)).collect();
        let (toward_zero, toward_inf) = match (toward_zero, toward_inf) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Ok(AdmissibilityReport::failed(cfg, format!("transform evaluation: {e}"))),
        };
        let decade_back = grid.iter().position(|&l| l <= 10.0 * lo * (1.0 + 1e-9)).unwrap_or(0);
        let col = |v: &[(f64, f64)], second: bool| -> Vec<f64> { v.iter().map(|p| if second { p.1 } else { p.0 }).collect() };
        let h = HLimits {
            k_infinite_at_zero: diverges(&col(&toward_zero, false), decade_back),
            k_vanishes_at_infinity: vanishes(&col(&toward_inf, false), decade_back),
            phi_vanishes_at_zero: vanishes(&col(&toward_zero, true), decade_back),
            phi_infinite_at_infinity: diverges(&col(&toward_inf, true), decade_back),
        };

        let mut a1 = f64::INFINITY;
        for (&l, &(k, _)) in grid.iter().zip(&toward_zero).skip(decade_back) {
            match self.cumulative_kernel(cfg.s0 / l) {
                Ok(c) => a1 = a1.min(c / k),
                Err(e) => return Ok(AdmissibilityReport::failed(cfg, format!("(A1) integral at lambda = {l:e}: {e}"))),
            }
        }

        let mut a2: f64 = 0.0;
        for &(t, r) in &cfg.t_pairs {
            match (self.cumulative_kernel(t), self.cumulative_kernel(r)) {
                (Ok(it), Ok(ir)) => a2 = a2.max((it / ir - 1.0).abs()),
                (Err(e), _) | (_, Err(e)) => {
                    return Ok(AdmissibilityReport::failed(cfg, format!("(A2) integral at t = {t:e}: {e}")))
                }
            }
        }

        let verdict = h.all() && a1 > cfg.a1_tol && a2 < cfg.a2_tol;
        Ok(AdmissibilityReport {
            h_limits_ok: h,
            a1_liminf: a1,
            a1_s0: cfg.s0,
            a2_max_ratio_dev: a2,
            verdict,
            diagnostic: None,
        })
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelSpec::from_json(s)
    }
}

/// Inverse-Gaussian kernel k(t) = √(b/2π)(2t^{−1/2}e^{−at/2} − √(2aπ)·erfc(√(at/2))).
fn inverse_gaussian_kernel(a: f64, b: f64, t: f64) -> f64 {
    let pref = (b / (2.0 * PI)).sqrt();
    let lead = 2.0 / t.sqrt();
    if a == 0.0 {
        return pref * lead;
    }
    let z2 = 0.5 * a * t;
    let z = z2.sqrt();
    if z < 6.0 {
        let erfcx = z2.exp() * specfun::erfc(z);
        return pref * (-z2).exp() * (lead - (2.0 * a * PI).sqrt() * erfcx);
    }
    // the bracket cancels to leading order; use the asymptotic series of erfcx
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..30 {
        let next = -term * (2 * n - 1) as f64 / (2.0 * z2);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum -= term;
    }
    pref * (-z2).exp() * lead * sum
}

fn diverges(values: &[f64], decade_back: usize) -> bool {
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let end = values[values.len() - 1];
    increasing && end.is_finite() && end / values[decade_back] - 1.0 > TREND_MIN_CHANGE
}

fn vanishes(values: &[f64], decade_back: usize) -> bool {
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let end = values[values.len() - 1];
    decreasing && end >= 0.0 && values[decade_back] / end - 1.0 > TREND_MIN_CHANGE
}

/// Minimum relative change across the last decade for a limit to count as
/// 0 or ∞ rather than a finite plateau.
const TREND_MIN_CHANGE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HLimits {
    pub k_infinite_at_zero: bool,
    pub k_vanishes_at_infinity: bool,
    pub phi_vanishes_at_zero: bool,
    pub phi_infinite_at_infinity: bool,
}

impl HLimits {
    pub fn all(&self) -> bool {
        self.k_infinite_at_zero && self.k_vanishes_at_infinity && self.phi_vanishes_at_zero && self.phi_infinite_at_infinity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityConfig {
    /// Decreasing positive λ values toward 0; the large-λ limits use 1/λ.
    pub lambda_grid: Vec<f64>,
    pub s0: f64,
    /// Pairs (t, r) with t/r close to 1 and both large.
    pub t_pairs: Vec<(f64, f64)>,
    pub a1_tol: f64,
    pub a2_tol: f64,
}

impl Default for AdmissibilityConfig {
    fn default() -> Self {
        let lambda_grid = (0..=56).map(|i| 10f64.powf(-1.0 - i as f64 / 8.0)).collect();
        let t_pairs = (0..=16)
            .map(|i| {
                let t = 10f64.powf(2.0 + i as f64 / 4.0);
                (t, t * (1.0 + 1e-3))
            })
            .collect();
        AdmissibilityConfig {
            lambda_grid,
            s0: 1.0,
            t_pairs,
            a1_tol: 1e-3,
            a2_tol: 1e-2,
        }
    }
}

impl AdmissibilityConfig {
    fn validate(&self) -> Result<()> {
        let g = &self.lambda_grid;
        if g.len() < 2 || g.iter().any(|&l| !(l > 0.0) || !l.is_finite()) || g.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::param("lambda_grid must be strictly decreasing positive reals"));
        }
        if g[0] / g[g.len() - 1] < 1e4 * (1.0 - 1e-12) {
            return Err(Error::param("lambda_grid must span at least 4 decades"));
        }
        if !(self.s0 > 0.0) {
            return Err(Error::param("s0 must be > 0"));
        }
        if self.t_pairs.iter().any(|&(t, r)| !(t > 0.0 && r > 0.0)) {
            return Err(Error::param("t_pairs entries must be positive"));
        }
        let ts: Vec<f64> = self.t_pairs.iter().map(|p| p.0).collect();
        let (tmin, tmax) = ts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
        if ts.is_empty() || tmax / tmin < 1e3 * (1.0 - 1e-12) {
            return Err(Error::param("t_pairs must span at least 3 decades"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub h_limits_ok: HLimits,
    pub a1_liminf: f64,
    pub a1_s0: f64,
    pub a2_max_ratio_dev: f64,
    pub verdict: bool,
    pub diagnostic: Option<String>,
}

impl AdmissibilityReport {
    fn failed(cfg: &AdmissibilityConfig, diagnostic: String) -> Self {
        AdmissibilityReport {
            h_limits_ok: HLimits {
                k_infinite_at_zero: false,
                k_vanishes_at_infinity: false,
                phi_vanishes_at_zero: false,
                phi_infinite_at_infinity: false,
            },
            a1_liminf: f64::NAN,
            a1_s0: cfg.s0,
            a2_max_ratio_dev: f64::NAN,
            verdict: false,
            diagnostic: Some(diagnostic),
        }
    }
}
