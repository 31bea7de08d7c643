use crate::error::{IclError, Result};
use crate::linalg::Mat;
use crate::predictors::{GdBetaParams, LtbParamsReduced};
use crate::risk::closed_form::optimal_gamma;
use crate::task::TaskSpec;

/// `1e-8·(1 + ‖Γ*‖_F)`.
pub fn default_tolerance(spec: &TaskSpec) -> Result<f64> {
    Ok(1e-8 * (1.0 + optimal_gamma(spec)?.norm()))
}

/// `β ∈ β* + Null(H)` and `Γ ∈ Γ* + Null(Z ↦ HZH)`, both up to `tol`.
pub fn check_gd_beta_optimality(spec: &TaskSpec, p: &GdBetaParams, tol: f64) -> Result<bool> {
    p.validate(spec.dim())?;
    let h = spec.h();
    let gamma_star = optimal_gamma(spec)?;
    let beta_ok = h.project_image_vec(&(&p.beta - spec.beta_star()))?.norm() <= tol;
    let gamma_ok = h.project_image_op(&(&p.gamma - gamma_star))?.norm() <= tol;
    Ok(beta_ok && gamma_ok)
}

/// Optimality of reduced LTB parameters. `NotApplicable` when
/// `rank(H^{1/2}Ψ^{1/2}) < 2`.
pub fn check_ltb_optimality(spec: &TaskSpec, p: &LtbParamsReduced, tol: f64) -> Result<bool> {
    p.validate(spec.dim())?;
    let cross = spec.h_sqrt().matrix() * spec.psi_sqrt().matrix();
    let rank = cross
        .singular_values()
        .iter()
        .filter(|&&s| s > 1e-10 * cross.norm().max(f64::MIN_POSITIVE))
        .count();
    if rank < 2 {
        return Err(IclError::NotApplicable(format!(
            "rank(H^(1/2) Ψ^(1/2)) = {rank} < 2"
        )));
    }
    if p.v_last == 0.0 {
        return Ok(false);
    }
    let h = spec.h();
    let bs = spec.beta_star();
    let v = p.v_last;
    let gamma_star = optimal_gamma(spec)?;

    let v12_ok = h.project_image_vec(&(&p.v12 * v))?.norm() <= tol;
    let v21_ok = h.project_image_vec(&(&p.v21 + bs * v))?.norm() <= tol;
    let gamma_ok = h.project_image_vec(&(&p.gamma - bs))?.norm() <= tol;
    let block: Mat = &p.v11 * v - gamma_star.transpose() + bs * p.v12.transpose() * v;
    let v11_ok = h.project_image_op(&block)?.norm() <= tol;
    Ok(v12_ok && v21_ok && gamma_ok && v11_ok)
}

/// Canonical optimum `(γ = β*, v−1 = c, v21 = −cβ*, V11 = Γ*ᵀ/c, v12 = 0)`.
pub fn canonical_ltb_optimum(spec: &TaskSpec, scale: f64) -> Result<LtbParamsReduced> {
    if scale == 0.0 || !scale.is_finite() {
        return Err(IclError::InvalidArgument("v−1 scale must be finite and nonzero".into()));
    }
    let bs = spec.beta_star();
    Ok(LtbParamsReduced {
        v11: optimal_gamma(spec)?.transpose() / scale,
        v12: bs * 0.0,
        v21: bs * -scale,
        v_last: scale,
        gamma: bs.clone(),
    })
}
