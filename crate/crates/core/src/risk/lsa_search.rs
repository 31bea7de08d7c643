//! Multi-start numerical minimization of the closed-form LSA risk.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{IclError, Result};
use crate::predictors::LsaParamsReduced;
use crate::risk::closed_form::{optimal_gamma, risk_lsa_closed};
use crate::task::{substream, TaskSpec};

#[derive(Clone, Debug)]
pub struct LsaSearchOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
    /// L-BFGS memory.
    pub history: usize,
    /// Stop after `patience` consecutive steps that each lower the risk by at
    /// most `f_tol·(1 + |risk|)`.
    pub f_tol: f64,
    pub patience: usize,
}

impl Default for LsaSearchOptions {
    fn default() -> Self {
        LsaSearchOptions {
            max_iters: 10_000,
            grad_tol: 1e-8,
            armijo: 1e-4,
            shrink: 0.5,
            history: 10,
            f_tol: 1e-12,
            patience: 25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LsaSearchResult {
    pub params: LsaParamsReduced,
    pub risk: f64,
    /// Index of the restart that produced `params`.
    pub restart: usize,
}

/// Central differences with step `1e-6·(1 + ‖θ‖)`.
pub fn central_gradient(f: &impl Fn(&[f64]) -> f64, theta: &[f64]) -> Vec<f64> {
    let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = 1e-6 * (1.0 + norm);
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = work[i];
            work[i] = orig + h;
            let up = f(&work);
            work[i] = orig - h;
            let down = f(&work);
            work[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS direction `−H·g` by the two-loop recursion over `(s, y)` pairs.
fn lbfgs_direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let a = dot(s, &q) / dot(y, s);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y)) = history.back() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= scale);
    }
    for ((s, y), a) in history.iter().zip(alphas.iter().rev()) {
        let b = dot(y, &q) / dot(y, s);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

/// L-BFGS with Armijo backtracking and a stall stop; falls back to steepest descent when the
/// quasi-Newton direction is not a descent direction. Returns `None` if the
/// objective becomes non-finite.
fn descend(f: &impl Fn(&[f64]) -> f64, mut theta: Vec<f64>, opts: &LsaSearchOptions) -> Option<(Vec<f64>, f64)> {
    let mut value = f(&theta);
    if !value.is_finite() {
        return None;
    }
    let mut g = central_gradient(f, &theta);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(opts.history);
    let mut stalled = 0;
    for _ in 0..opts.max_iters {
        if stalled >= opts.patience {
            break;
        }
        let g2 = dot(&g, &g);
        if !g2.is_finite() {
            return None;
        }
        if g2.sqrt() <= opts.grad_tol {
            break;
        }
        let mut dir = lbfgs_direction(&g, &history);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -g2;
        }
        let mut step = 1.0;
        let mut next = None;
        while step > 1e-20 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let tv = f(&trial);
            if tv.is_finite() && tv <= value + opts.armijo * step * slope {
                next = Some((trial, tv));
                break;
            }
            step *= opts.shrink;
        }
        let Some((trial, tv)) = next else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let g_new = central_gradient(f, &trial);
        let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == opts.history {
                history.pop_front();
            }
            history.push_back((s, y));
        }
        if value - tv <= opts.f_tol * (1.0 + value.abs()) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        theta = trial;
        value = tv;
        g = g_new;
    }
    Some((theta, value))
}

/// Restart 0 starts from the GD-0 optimum (`u−1 = 1`, `U11 = Γ*ᵀ`); restart
/// `k ≥ 1` draws a standard normal start scaled by `1/√d` from substream `k`.
fn initial_point(spec: &TaskSpec, k: usize, seed: u64) -> Result<Vec<f64>> {
    let d = spec.dim();
    if k == 0 {
        let warm = match optimal_gamma(spec) {
            Ok(g) => LsaParamsReduced::gd_zero(&g),
            Err(_) => LsaParamsReduced::zeros(d),
        };
        return Ok(warm.to_flat());
    }
    let mut rng = substream(seed, k as u64);
    let scale = 1.0 / (d as f64).sqrt();
    Ok((0..d * d + 2 * d + 1)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect())
}

pub fn minimize_lsa_risk_with(
    spec: &TaskSpec,
    restarts: usize,
    seed: u64,
    opts: &LsaSearchOptions,
) -> Result<LsaSearchResult> {
    if restarts == 0 {
        return Err(IclError::InvalidArgument("restarts must be ≥ 1".into()));
    }
    let d = spec.dim();
    let objective = |theta: &[f64]| -> f64 {
        LsaParamsReduced::from_flat(d, theta)
            .and_then(|p| risk_lsa_closed(spec, &p))
            .unwrap_or(f64::NAN)
    };
    let runs: Vec<Option<(Vec<f64>, f64)>> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let start = initial_point(spec, k, seed).ok()?;
            descend(&objective, start, opts)
        })
        .collect();

    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for (k, run) in runs.into_iter().enumerate() {
        if let Some((theta, value)) = run {
            // strict comparison keeps the earliest restart on ties
            if best.as_ref().is_none_or(|(_, _, b)| value < *b) {
                best = Some((k, theta, value));
            }
        }
    }
    let (restart, theta, risk) = best.ok_or(IclError::SearchFailed { restarts })?;
    Ok(LsaSearchResult {
        params: LsaParamsReduced::from_flat(d, &theta)?,
        risk,
        restart,
    })
}

pub fn minimize_lsa_risk(spec: &TaskSpec, restarts: usize, seed: u64) -> Result<LsaSearchResult> {
    minimize_lsa_risk_with(spec, restarts, seed, &LsaSearchOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use crate::risk::closed_form::min_risk_gd_beta;

    fn quick() -> LsaSearchOptions {
        LsaSearchOptions {
            max_iters: 300,
            ..Default::default()
        }
    }

    #[test]
    fn gradient_of_quadratic() {
        let f = |t: &[f64]| t[0] * t[0] + 3.0 * t[1];
        let g = central_gradient(&f, &[2.0, -1.0]);
        assert!((g[0] - 4.0).abs() < 1e-6 && (g[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn zero_prior_mean_reaches_gd_optimum() {
        let spec = TaskSpec::isotropic(2, 4, 0.5).unwrap();
        let r = minimize_lsa_risk_with(&spec, 3, 1, &quick()).unwrap();
        let min = min_risk_gd_beta(&spec).unwrap();
        assert!(r.risk >= min - 1e-8);
        assert!((r.risk - min).abs() <= 1e-4 * min);
    }

    #[test]
    fn more_restarts_never_worse() {
        let spec = TaskSpec::isotropic(2, 3, 1.0)
            .unwrap()
            .with_beta_star(Vector::from_vec(vec![2.0, -1.0]))
            .unwrap();
        let one = minimize_lsa_risk_with(&spec, 1, 4, &quick()).unwrap();
        let four = minimize_lsa_risk_with(&spec, 4, 4, &quick()).unwrap();
        assert!(four.risk <= one.risk);
    }

    #[test]
    fn zero_restarts_rejected() {
        let spec = TaskSpec::isotropic(1, 1, 1.0).unwrap();
        assert!(minimize_lsa_risk(&spec, 0, 0).is_err());
    }
}
