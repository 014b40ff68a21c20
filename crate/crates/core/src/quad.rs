//! Quadrature rules shared by the numerical modules.
//!
//! * globally adaptive Gauss–Kronrod (7/15) over a list of breakpoints, for
//!   real or complex integrands;
//! * Gauss–Legendre and Gauss–Laguerre node tables built by Newton iteration;
//! * adaptive Simpson, kept as the simple fallback rule of the subordination
//!   integral.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values a quadrature can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_err: f64,
    pub evals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).magnitude();
    (value, err)
}

/// Globally adaptive Gauss–Kronrod integration over consecutive breakpoints.
///
/// `breaks` must be sorted and finite with at least two entries.
pub fn integrate_breaks<T, F>(mut f: F, breaks: &[f64], opts: QuadOptions) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if breaks.len() < 2 {
        return Err(Error::Quadrature("need at least two breakpoints".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(Error::Quadrature(format!("bad interval [{a}, {b}]")));
        }
        if b == a {
            continue;
        }
        let (value, err) = gk15(&mut f, a, b);
        evals += 15;
        heap.push(Segment { a, b, value, err });
    }
    let mut err: f64 = heap.iter().map(|seg| seg.err).sum();
    let mut total = heap.iter().fold(T::zero(), |s, seg| s + seg.value);
    loop {
        if !err.is_finite() || !total.magnitude().is_finite() {
            return Err(Error::Quadrature("integrand returned a non-finite value".into()));
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if err <= target {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "{} subintervals exhausted, error estimate {err:.3e} > target {target:.3e}",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("non-empty segment heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evals += 30;
        total = total - worst.value + v1 + v2;
        err = err - worst.err + e1 + e2;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
    }
    // final sum in interval order so the result does not depend on heap layout
    let mut segs = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = segs.iter().fold(T::zero(), |s, seg| s + seg.value);
    let abs_err = segs.iter().map(|seg| seg.err).sum();
    Ok(QuadResult {
        value,
        abs_err,
        evals,
    })
}

pub fn integrate<T, F>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_breaks(f, &[a, b], opts)
}

/// ∫ f(r) dr over (0, ∞), taken as ∫ f(eˣ)eˣ dx on `[ln center − below, ln center + above]`.
///
/// Suited to integrands with power-law behaviour at both ends, which become
/// exponentially decaying in the log variable. Breakpoints are placed at
/// unit spacing in x.
pub fn integrate_log_axis<T, F>(mut f: F, center: f64, below: f64, above: f64, opts: QuadOptions) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if !(center > 0.0) || !(below >= 0.0) || !(above >= 0.0) {
        return Err(Error::Quadrature(format!(
            "log-axis range needs center > 0, got center = {center}"
        )));
    }
    let c = center.ln();
    let (lo, hi) = (c - below, c + above);
    let n = ((hi - lo).ceil() as usize).max(1);
    let breaks: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    integrate_breaks(
        |x: f64| {
            let r = x.exp();
            f(r) * r
        },
        &breaks,
        opts,
    )
}

/// Breakpoints `0, s·ratio^-levels, …, s, s·ratio, …` up to `upper`.
///
/// Geometric refinement toward 0 resolves integrable endpoint singularities;
/// geometric growth past `scale` follows slowly decaying tails.
pub fn geometric_breaks(scale: f64, upper: f64, ratio: f64, levels_below: usize) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut below: Vec<f64> = (1..=levels_below)
        .map(|j| scale * ratio.powi(-(j as i32)))
        .filter(|&x| x < upper)
        .collect();
    below.reverse();
    pts.extend(below);
    let mut x = scale;
    while x < upper {
        pts.push(x);
        x *= ratio;
    }
    pts.push(upper);
    pts.dedup();
    pts
}

/// Nodes and weights of an n-point Gauss rule.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussRule { nodes, weights }
}

/// The n-point Gauss–Legendre rule mapped to [0, 1], built once per n ≤ 64.
pub fn legendre_unit(n: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<OnceLock<GaussRule>>> = OnceLock::new();
    assert!((1..=64).contains(&n), "cached Gauss–Legendre rules cover 1..=64 nodes");
    let rules = RULES.get_or_init(|| (0..=64).map(|_| OnceLock::new()).collect());
    rules[n].get_or_init(|| {
        let r = gauss_legendre(n);
        GaussRule {
            nodes: r.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: r.weights.iter().map(|w| 0.5 * w).collect(),
        }
    })
}

pub fn legendre64_unit() -> &'static GaussRule {
    legendre_unit(64)
}

/// n-point Gauss–Laguerre rule with *modified* weights `w_i·e^{x_i}`, so that
/// `∫₀^∞ f(x) dx ≈ Σ w_i f(x_i)` for integrands without an explicit `e^{-x}`.
pub fn gauss_laguerre_modified(n: usize) -> GaussRule {
    let mut nodes: Vec<f64> = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
            }
        };
        let mut p2 = 0.0;
        for _ in 0..200 {
            let (mut p1, mut q2) = (1.0_f64, 0.0_f64);
            for j in 1..=n {
                let p3 = q2;
                q2 = p1;
                p1 = ((2 * j - 1) as f64 - z) * q2 / j as f64 - (j - 1) as f64 * p3 / j as f64;
            }
            p2 = q2;
            let pp = nf * (p1 - q2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        // w = z / (n² L_{n-1}(z)²); kept in log form against overflow
        let ln_w = z.ln() - 2.0 * nf.ln() - 2.0 * p2.abs().ln();
        nodes.push(z);
        weights.push((ln_w + z).exp());
    }
    GaussRule { nodes, weights }
}

/// Adaptive Simpson on [a, b] with Richardson correction.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64> {
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: FnMut(f64) -> f64>(
        f: &mut F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        failed: &mut bool,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 {
            *failed = true;
            return left + right + delta / 15.0;
        }
        if delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, failed)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, failed)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut failed = false;
    let v = recurse(&mut f, a, b, fa, fm, fb, whole, tol, max_depth, &mut failed);
    if failed {
        return Err(Error::Quadrature(format!(
            "adaptive Simpson reached depth {max_depth} on [{a}, {b}]"
        )));
    }
    Ok(v)
}
