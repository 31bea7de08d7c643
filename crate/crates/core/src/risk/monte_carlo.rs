use rayon::prelude::*;
use serde::Serialize;

use crate::error::{IclError, Result};
use crate::linalg::{Mat, PsdMatrix};
use crate::task::{sample_prompt, substream, Prompt, TaskSpec};

/// Shard count is fixed so estimates do not depend on the worker count.
pub const MC_SHARDS: u64 = 32;

/// Streaming mean and variance (Welford), mergeable across shards.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// `sd / √n`.
    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiskReport {
    pub estimate: f64,
    pub std_err: f64,
    pub n_samples: u64,
    pub closed_form: Option<f64>,
}

impl RiskReport {
    fn from_stats(s: &RunningStats) -> Self {
        RiskReport {
            estimate: s.mean(),
            std_err: s.std_err(),
            n_samples: s.count(),
            closed_form: None,
        }
    }

    pub fn with_closed_form(mut self, value: f64) -> Self {
        self.closed_form = Some(value);
        self
    }

    /// `|closed_form − estimate| / std_err`; infinite on a mismatch with zero spread.
    pub fn z_score(&self) -> Option<f64> {
        self.closed_form.map(|c| {
            let diff = (c - self.estimate).abs();
            if self.std_err > 0.0 {
                diff / self.std_err
            } else if diff <= 1e-12 * (1.0 + c.abs()) {
                0.0
            } else {
                f64::INFINITY
            }
        })
    }
}

/// Comparison of two predictors on the same prompts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedReport {
    pub first: RiskReport,
    pub second: RiskReport,
    /// Mean of `loss_first − loss_second`.
    pub diff: f64,
    pub diff_std_err: f64,
}

fn shard_sizes(n: u64) -> Vec<u64> {
    (0..MC_SHARDS)
        .map(|i| n / MC_SHARDS + u64::from(i < n % MC_SHARDS))
        .collect()
}

/// Runs `visit` on `n` prompts split across fixed substreams and merges the
/// per-shard accumulators in shard order.
fn sharded<A, F>(spec: &TaskSpec, n: u64, seed: u64, init: impl Fn() -> A + Sync, visit: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut A, &Prompt) + Sync,
{
    shard_sizes(n)
        .into_par_iter()
        .enumerate()
        .map(|(idx, count)| {
            let mut rng = substream(seed, idx as u64);
            let mut acc = init();
            for _ in 0..count {
                let p = sample_prompt(spec, &mut rng);
                visit(&mut acc, &p);
            }
            acc
        })
        .collect()
}

/// Squared-error risk of several predictors evaluated on common prompts.
pub fn monte_carlo_risks<F>(spec: &TaskSpec, predictors: &[F], n: u64, seed: u64) -> Result<Vec<RiskReport>>
where
    F: Fn(&Prompt) -> f64 + Sync,
{
    if n < 2 {
        return Err(IclError::InvalidArgument(format!("n = {n} must be ≥ 2")));
    }
    let k = predictors.len();
    let shards = sharded(
        spec,
        n,
        seed,
        || vec![RunningStats::default(); k],
        |acc, p| {
            for (s, f) in acc.iter_mut().zip(predictors) {
                let r = f(p) - p.query_y;
                s.push(r * r);
            }
        },
    );
    let mut total = vec![RunningStats::default(); k];
    for shard in &shards {
        for (t, s) in total.iter_mut().zip(shard) {
            t.merge(s);
        }
    }
    Ok(total.iter().map(RiskReport::from_stats).collect())
}

/// `E[(f(E) − y)²]` over `n` fresh prompts; deterministic in `(seed, MC_SHARDS)`.
pub fn monte_carlo_risk<F>(spec: &TaskSpec, predictor: F, n: u64, seed: u64) -> Result<RiskReport>
where
    F: Fn(&Prompt) -> f64 + Sync,
{
    Ok(monte_carlo_risks(spec, &[predictor], n, seed)?.remove(0))
}

/// Common-random-numbers comparison; the paired standard error is that of the
/// per-prompt loss difference.
pub fn monte_carlo_paired<F, G>(spec: &TaskSpec, first: F, second: G, n: u64, seed: u64) -> Result<PairedReport>
where
    F: Fn(&Prompt) -> f64 + Sync,
    G: Fn(&Prompt) -> f64 + Sync,
{
    if n < 2 {
        return Err(IclError::InvalidArgument(format!("n = {n} must be ≥ 2")));
    }
    let shards = sharded(
        spec,
        n,
        seed,
        || [RunningStats::default(); 3],
        |acc, p| {
            let la = (first(p) - p.query_y).powi(2);
            let lb = (second(p) - p.query_y).powi(2);
            acc[0].push(la);
            acc[1].push(lb);
            acc[2].push(la - lb);
        },
    );
    let mut total = [RunningStats::default(); 3];
    for shard in &shards {
        for (t, s) in total.iter_mut().zip(shard) {
            t.merge(s);
        }
    }
    Ok(PairedReport {
        first: RiskReport::from_stats(&total[0]),
        second: RiskReport::from_stats(&total[1]),
        diff: total[2].mean(),
        diff_std_err: total[2].std_err(),
    })
}

/// Entrywise Monte-Carlo mean and standard error of `XᵀX·A·XᵀX`.
pub fn monte_carlo_fourth_moment(h: &PsdMatrix, a: &Mat, m: usize, n: u64, seed: u64) -> Result<(Mat, Mat)> {
    use rand::Rng;
    use rand_distr::StandardNormal;

    let d = h.dim();
    if a.shape() != (d, d) {
        return Err(IclError::dims("fourth moment A", format!("{d}x{d}"), format!("{}x{}", a.nrows(), a.ncols())));
    }
    if n < 2 || m == 0 {
        return Err(IclError::InvalidArgument("need n ≥ 2 and M ≥ 1".into()));
    }
    let hs = h.sqrt();
    let shards: Vec<Vec<RunningStats>> = shard_sizes(n)
        .into_par_iter()
        .enumerate()
        .map(|(idx, count)| {
            let mut rng = substream(seed, idx as u64);
            let mut acc = vec![RunningStats::default(); d * d];
            for _ in 0..count {
                let z = Mat::from_fn(m, d, |_, _| rng.sample(StandardNormal));
                let x = z * hs.matrix();
                let g = x.tr_mul(&x);
                let v = &g * a * &g;
                for (s, val) in acc.iter_mut().zip(v.iter()) {
                    s.push(*val);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![RunningStats::default(); d * d];
    for shard in &shards {
        for (t, s) in total.iter_mut().zip(shard) {
            t.merge(s);
        }
    }
    Ok((
        Mat::from_iterator(d, d, total.iter().map(RunningStats::mean)),
        Mat::from_iterator(d, d, total.iter().map(RunningStats::std_err)),
    ))
}
