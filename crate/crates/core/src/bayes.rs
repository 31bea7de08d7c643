//! Posterior-mean predictor under the Gaussian task prior and the
//! `Σ min{φ̄, φᵢ}` rate comparator.

use serde::Serialize;

use crate::error::{IclError, Result};
use crate::linalg::{Mat, PsdMatrix};
use crate::task::{Prompt, TaskSpec};

/// `xᵀβ* + xᵀΨ^{1/2}(Ψ^{1/2}XᵀXΨ^{1/2} + σ²I)⁻¹Ψ^{1/2}Xᵀ(y − Xβ*)`.
///
/// With `σ² = 0` the inverse is the pseudo-inverse.
pub fn bayes_predict(spec: &TaskSpec, p: &Prompt) -> Result<f64> {
    let d = spec.dim();
    if p.context_x.ncols() != d || p.query_x.len() != d {
        return Err(IclError::dims("bayes_predict prompt", d, p.context_x.ncols()));
    }
    if p.context_y.len() != p.context_x.nrows() {
        return Err(IclError::dims("bayes_predict labels", p.context_x.nrows(), p.context_y.len()));
    }
    let bs = spec.beta_star();
    let ps = spec.psi_sqrt().matrix();
    let xp = &p.context_x * ps;
    let resid = &p.context_y - &p.context_x * bs;
    let rhs = xp.tr_mul(&resid);
    let gram = xp.tr_mul(&xp);
    let sigma2 = spec.sigma2();

    let coef = if sigma2 > 0.0 {
        let inner = gram + Mat::identity(d, d) * sigma2;
        match inner.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => PsdMatrix::new(inner)?.pinv().matrix() * rhs,
        }
    } else {
        PsdMatrix::new(gram)?.pinv().matrix() * rhs
    };
    Ok(p.query_x.dot(bs) + p.query_x.dot(&(ps * coef)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BayesRate {
    /// Nonincreasing eigenvalues of `Ψ^{1/2}HΨ^{1/2}`.
    pub phi: Vec<f64>,
    pub phi_bar: f64,
    pub rate: f64,
}

pub fn bayes_rate(spec: &TaskSpec) -> Result<BayesRate> {
    let ps = spec.psi_sqrt().matrix();
    let lam = PsdMatrix::new(ps * spec.h().matrix() * ps)?;
    let phi: Vec<f64> = lam.spectral().eigenvalues().iter().copied().collect();
    let phi_bar = (lam.trace() + spec.sigma2()) / spec.context_len() as f64;
    let rate = phi.iter().map(|&p| p.min(phi_bar)).sum();
    Ok(BayesRate { phi, phi_bar, rate })
}
