//! Path sampling of subordinators and their first-passage inverses.
//!
//! Every path draws from its own ChaCha8 stream keyed by `(seed, path index)`,
//! so results do not depend on how paths are scheduled across threads.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::models::ModelSpec;

/// Stream offset separating bulk increment draws from per-path streams.
const INCREMENT_STREAM_BASE: u64 = 1 << 48;
const INCREMENT_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon_s: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.horizon_s > 0.0) {
            return Err(Error::param(format!(
                "dt = {} and horizon_s = {} must be > 0",
                self.dt, self.horizon_s
            )));
        }
        if self.dt > self.horizon_s / 100.0 {
            return Err(Error::param(format!(
                "dt = {} exceeds horizon_s/100 = {}",
                self.dt,
                self.horizon_s / 100.0
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::param("n_paths must be > 0"));
        }
        Ok(())
    }

    fn max_steps(&self) -> u64 {
        (self.horizon_s / self.dt).ceil() as u64
    }
}

/// Draws of S_dt for one kernel.
#[derive(Debug, Clone, Copy)]
enum Sampler {
    /// Kanter's representation of a unit one-sided stable law, times dt^{1/α}.
    Stable { alpha: f64, scale: f64 },
    Gamma(Gamma<f64>),
    /// Inverse Gaussian with mean `mu` and shape `shape`.
    InverseGaussian { mu: f64, shape: f64 },
    /// Lévy law c/Z², the a = 0 limit of the inverse Gaussian.
    Levy { c: f64 },
}

impl Sampler {
    fn new(k: &KernelSpec, dt: f64) -> Result<Self> {
        k.validate()?;
        if !(dt > 0.0) {
            return Err(Error::param(format!("dt = {dt} must be > 0")));
        }
        Ok(match *k {
            KernelSpec::Stable { alpha } => Sampler::Stable {
                alpha,
                scale: dt.powf(1.0 / alpha),
            },
            KernelSpec::GammaSub { a, b } => Sampler::Gamma(
                Gamma::new(a * dt, 1.0 / b).map_err(|e| Error::param(format!("gamma sampler: {e}")))?,
            ),
            KernelSpec::InverseGaussian { a, b } if a > 0.0 => Sampler::InverseGaussian {
                mu: b.sqrt() * dt / a.sqrt(),
                shape: b * dt * dt,
            },
            KernelSpec::InverseGaussian { b, .. } => Sampler::Levy { c: b * dt * dt },
            _ => return Err(Error::SamplerUnavailable(k.label())),
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Sampler::Stable { alpha, scale } => {
                let u: f64 = PI * rng.sample::<f64, _>(Open01);
                let w: f64 = rng.sample(Exp1);
                let head = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
                let tail = (((1.0 - alpha) * u).sin() / w).powf((1.0 - alpha) / alpha);
                scale * head * tail
            }
            Sampler::Gamma(g) => g.sample(rng),
            Sampler::InverseGaussian { mu, shape } => {
                let z: f64 = rng.sample(StandardNormal);
                let c = mu * z * z / (2.0 * shape);
                // smaller root of the quadratic, written without cancellation
                let x = mu / (1.0 + c + (c * c + 2.0 * c).sqrt());
                if rng.random::<f64>() * (mu + x) <= mu {
                    x
                } else {
                    mu * mu / x
                }
            }
            Sampler::Levy { c } => {
                let z: f64 = rng.sample(StandardNormal);
                c / (z * z)
            }
        }
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` i.i.d. draws of S_dt.
pub fn sample_increments(k: &KernelSpec, dt: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = Sampler::new(k, dt)?;
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(INCREMENT_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = path_rng(seed, INCREMENT_STREAM_BASE + c as u64);
            let len = INCREMENT_CHUNK.min(n - c * INCREMENT_CHUNK);
            (0..len).map(|_| sampler.draw(&mut rng)).collect()
        })
        .collect();
    Ok(chunks.concat())
}

/// First-passage samples E_t for one target time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub target_t: f64,
    pub spec: KernelSpec,
    pub config: PathConfig,
}

#[derive(Serialize)]
struct SampleMeta<'a> {
    spec: &'a KernelSpec,
    config: &'a PathConfig,
    t: f64,
}

impl SampleSet {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sample")?;
        for v in &self.values {
            writeln!(out, "{v:.16e}")?;
        }
        Ok(())
    }

    /// Writes the CSV and a `.json` sidecar with the kernel, config and t.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        crate::io::write_atomic(csv_path, &buf)?;
        let meta = SampleMeta {
            spec: &self.spec,
            config: &self.config,
            t: self.target_t,
        };
        let json = serde_json::to_vec_pretty(&meta)?;
        crate::io::write_atomic(&csv_path.with_extension("json"), &json)
    }

    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }
}

/// Runs one path until it has passed every level in `ts` (ascending) and
/// returns the interpolated passage times, or `None` if the horizon ran out.
fn passage_times(sampler: &Sampler, ts: &[f64], dt: f64, max_steps: u64, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(ts.len());
    let mut level = 0;
    let mut s = 0.0;
    let mut step = 0u64;
    while level < ts.len() && ts[level] <= 0.0 {
        out.push(0.0);
        level += 1;
    }
    while level < ts.len() {
        if step >= max_steps {
            return None;
        }
        let inc = sampler.draw(rng);
        let next = s + inc;
        while level < ts.len() && next >= ts[level] {
            let frac = if inc > 0.0 { (ts[level] - s) / inc } else { 1.0 };
            out.push((step as f64 + frac) * dt);
            level += 1;
        }
        s = next;
        step += 1;
    }
    Some(out)
}

/// E_t samples at several levels from the same paths, so each path's
/// passage times are non-decreasing in t.
pub fn first_passage_multi(k: &KernelSpec, ts: &[f64], config: &PathConfig) -> Result<Vec<SampleSet>> {
    config.validate()?;
    if ts.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::domain("first-passage levels must be finite and >= 0"));
    }
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| ts[i]).collect();
    let sampler = Sampler::new(k, config.dt)?;
    let max_steps = config.max_steps();
    let paths: Vec<Option<Vec<f64>>> = (0..config.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(config.seed, p as u64);
            passage_times(&sampler, &sorted, config.dt, max_steps, &mut rng)
        })
        .collect();
    let censored = paths.iter().filter(|p| p.is_none()).count();
    if censored > 0 {
        return Err(Error::Horizon {
            censored,
            total: config.n_paths,
            horizon: config.horizon_s,
        });
    }
    let mut sets: Vec<SampleSet> = ts
        .iter()
        .map(|&t| SampleSet {
            values: Vec::with_capacity(config.n_paths),
            target_t: t,
            spec: k.clone(),
            config: *config,
        })
        .collect();
    for path in paths.into_iter().flatten() {
        for (j, &i) in order.iter().enumerate() {
            sets[i].values.push(path[j]);
        }
    }
    Ok(sets)
}

pub fn first_passage(k: &KernelSpec, t: f64, config: &PathConfig) -> Result<SampleSet> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("first passage level t = {t} must be > 0")));
    }
    Ok(first_passage_multi(k, &[t], config)?.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        let var = if n > 1 { pairwise_sum(&sq) / (n - 1) as f64 } else { 0.0 };
        McEstimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }

    /// |mean − target| in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.std_error.max(f64::MIN_POSITIVE)
    }
}

/// Sample mean of u₀(x, E_t) over first-passage paths.
pub fn mc_subordinate(
    model: &ModelSpec,
    k: &KernelSpec,
    x: Option<f64>,
    t: f64,
    config: &PathConfig,
) -> Result<McEstimate> {
    let samples = first_passage(k, t, config)?;
    let values = samples
        .values
        .iter()
        .map(|&tau| model.eval_u0(x, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_values(&values))
}

/// Empirical 𝔼[e^{−λS₁}] from `n` draws, with its exact value e^{−Φ(λ)}.
pub fn laplace_exponent_check(k: &KernelSpec, lambda: f64, n: usize, seed: u64) -> Result<(McEstimate, f64)> {
    let draws = sample_increments(k, 1.0, n, seed)?;
    let values: Vec<f64> = draws.iter().map(|s| (-lambda * s).exp()).collect();
    Ok((McEstimate::from_values(&values), (-k.phi_real(lambda)?).exp()))
}

/// sup |F_n − F| over the sorted sample.
pub fn ks_distance(samples: &SampleSet, cdf: impl Fn(f64) -> f64) -> f64 {
    ks_distance_values(&samples.values, cdf)
}

pub fn ks_distance_values(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        // step over ties so the empirical CDF jumps once per distinct value
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let at = cdf(sorted[i]);
        let below = cdf(sorted[i].next_down());
        d = d.max((below - i as f64 / n).abs()).max(((j + 1) as f64 / n - at).abs());
        i = j + 1;
    }
    d
}

/// Fixed-order pairwise summation.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}
