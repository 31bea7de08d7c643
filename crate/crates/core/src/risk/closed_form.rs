use crate::error::{IclError, Result};
use crate::linalg::{Mat, PsdMatrix, Vector};
use crate::predictors::{GdBetaParams, LsaParamsReduced, LtbParamsReduced};
use crate::task::TaskSpec;

/// `Ω = ((M+1)/M)·H^{1/2}ΨH^{1/2} + ((tr(HΨ)+σ²)/M)·I`, strictly positive definite.
#[derive(Clone, Debug)]
pub struct OmegaMatrix {
    value: PsdMatrix,
    inverse: Mat,
}

impl OmegaMatrix {
    pub fn value(&self) -> &PsdMatrix {
        &self.value
    }

    pub fn matrix(&self) -> &Mat {
        self.value.matrix()
    }

    pub fn inverse(&self) -> &Mat {
        &self.inverse
    }
}

/// `H^{1/2}ΨH^{1/2}`.
pub fn lambda_h(spec: &TaskSpec) -> Mat {
    let hs = spec.h_sqrt().matrix();
    hs * spec.psi().matrix() * hs
}

pub fn omega(spec: &TaskSpec) -> Result<OmegaMatrix> {
    let m = spec.context_len() as f64;
    let scale = spec.signal() + spec.sigma2();
    if !(scale > 0.0) {
        return Err(IclError::SingularOmega { value: scale });
    }
    let d = spec.dim();
    let value = lambda_h(spec) * ((m + 1.0) / m) + Mat::identity(d, d) * (scale / m);
    let value = PsdMatrix::new(value)?;
    // eigenvalues are bounded below by scale/M, so the pseudo-inverse is the inverse
    let inverse = value.pinv().matrix().clone();
    Ok(OmegaMatrix { value, inverse })
}

/// `Γ* = Ψ·H^{1/2}·Ω⁻¹·H^{-1/2}`.
pub fn optimal_gamma(spec: &TaskSpec) -> Result<Mat> {
    let om = omega(spec)?;
    Ok(optimal_gamma_with(spec, &om))
}

pub(crate) fn optimal_gamma_with(spec: &TaskSpec, om: &OmegaMatrix) -> Mat {
    spec.psi().matrix() * spec.h_sqrt().matrix() * om.inverse() * spec.h().pinv_sqrt().matrix()
}

/// `σ² + tr(Λ − Λ·Λ·Ω⁻¹)` with `Λ = H^{1/2}ΨH^{1/2}`; independent of `β*`.
pub fn min_risk_gd_beta(spec: &TaskSpec) -> Result<f64> {
    let om = omega(spec)?;
    let lam = lambda_h(spec);
    Ok(spec.sigma2() + lam.trace() - (&lam * &lam * om.inverse()).trace())
}

/// `(I−ΓH)ᵀH(I−ΓH) + (tr(HΓᵀHΓ)/M)·H + (1/M)·HΓᵀHΓH`.
pub fn h_gamma(spec: &TaskSpec, gamma: &Mat) -> Result<PsdMatrix> {
    let d = spec.dim();
    if gamma.shape() != (d, d) {
        return Err(IclError::dims("h_gamma Γ", format!("{d}x{d}"), format!("{}x{}", gamma.nrows(), gamma.ncols())));
    }
    PsdMatrix::new(h_gamma_raw(spec, gamma))
}

pub(crate) fn h_gamma_raw(spec: &TaskSpec, gamma: &Mat) -> Mat {
    let d = spec.dim();
    let m = spec.context_len() as f64;
    let h = spec.h().matrix();
    let r = Mat::identity(d, d) - gamma * h;
    let hgthg = h * gamma.transpose() * h * gamma; // HΓᵀHΓ
    let out = r.transpose() * h * &r + h * (hgthg.trace() / m) + &hgthg * h / m;
    (&out + out.transpose()) * 0.5
}

/// `δᵀH_Γδ + tr[(H^{1/2}ΓH^{1/2} − ΛΩ⁻¹)·Ω·(·)ᵀ]` with `δ = β − β*`.
pub fn excess_risk_gd_beta(spec: &TaskSpec, p: &GdBetaParams) -> Result<f64> {
    p.validate(spec.dim())?;
    let om = omega(spec)?;
    Ok(excess_risk_with(spec, &om, p))
}

pub(crate) fn excess_risk_with(spec: &TaskSpec, om: &OmegaMatrix, p: &GdBetaParams) -> f64 {
    let delta = &p.beta - spec.beta_star();
    let hg = h_gamma_raw(spec, &p.gamma);
    let hs = spec.h_sqrt().matrix();
    let diff = hs * &p.gamma * hs - lambda_h(spec) * om.inverse();
    delta.dot(&(hg * &delta)) + (&diff * om.matrix() * diff.transpose()).trace()
}

/// Closed-form risk of the GD-β predictor: excess plus the minimum.
pub fn risk_gd_beta_closed(spec: &TaskSpec, p: &GdBetaParams) -> Result<f64> {
    Ok(excess_risk_gd_beta(spec, p)? + min_risk_gd_beta(spec)?)
}

/// Exact risk of the attention readout in `b = u21 + u−1·β*`, `A = U11 + β*·u12ᵀ`,
/// `a = u12`, measured against `target` (`β*` for LSA, `β* − γ` for LTB).
fn attention_risk(spec: &TaskSpec, u11: &Mat, u12: &Vector, u21: &Vector, u: f64, target: &Vector) -> f64 {
    let m = spec.context_len() as f64;
    let s2 = spec.sigma2();
    let bs = spec.beta_star();
    let h = spec.h().matrix();
    let psi = spec.psi().matrix();

    let a = u12;
    let b = u21 + bs * u;
    let am = u11 + bs * a.transpose();

    let hpsih = h * psi * h;
    let t = (h * psi).trace();
    let t2 = (h * psi * h * psi).trace();
    let ha = h * a;
    let h_a = a.dot(&ha);
    let hb = h * &b;
    let b_hb = b.dot(&hb);
    let ah = &am * h;
    let ahah_t = &ah * &am.transpose() * h; // A H Aᵀ H
    let aha = &am * &ha; // A H a

    let k1 = &hpsih * ((m + 1.0) / m) + h * (t / m);
    let k2 = &k1 + h * (s2 / m);

    let term_i = b.dot(&(&k1 * &b)) * h_a
        + (s2 / m) * b_hb * h_a
        + u * u * (am.transpose() * &k1 * &ah).trace()
        + (s2 / m) * u * u * ahah_t.trace()
        + 2.0 * u * b.dot(&(&k2 * &aha))
        - 2.0 * u * (&ah * psi * h).trace()
        - 2.0 * a.dot(&(&hpsih * &b));

    let term_ii = (b_hb * (am.transpose() * h * &ah).trace()
        + 4.0 * u * b.dot(&(&hpsih * &aha))
        + 4.0 * u * u * t2 * h_a)
        / m;

    let hah = h * &ah;
    let term_iii = ((m + 1.0) / m) * hb.dot(&(&ah * am.transpose() * &hb))
        - 2.0 * b.dot(&(&hah * target))
        + 2.0 * u * (t + s2) * hb.dot(&aha);

    let term_iv = -2.0 * (t + s2) * u * target.dot(&ha)
        + u * u
            * h_a
            * (2.0 * t2
                + ((m + 2.0) / m) * t * t
                + (2.0 + 4.0 / m) * s2 * t
                + ((m + 2.0) / m) * s2 * s2);

    s2 + term_i + term_ii + term_iii + target.dot(&(h * target)) + t + term_iv
}

/// Exact LSA risk in the `(A, b)` parameterization.
pub fn risk_lsa_closed(spec: &TaskSpec, p: &LsaParamsReduced) -> Result<f64> {
    p.validate(spec.dim())?;
    Ok(attention_risk(spec, &p.u11, &p.u12, &p.u21, p.u_last, spec.beta_star()))
}

/// LTB risk: the LSA expansion of the attention blocks regressed on `β* − γ`.
pub fn risk_ltb_closed(spec: &TaskSpec, p: &LtbParamsReduced) -> Result<f64> {
    p.validate(spec.dim())?;
    let target = spec.beta_star() - &p.gamma;
    Ok(attention_risk(spec, &p.v11, &p.v12, &p.v21, p.v_last, &target))
}

/// `max{2/(3(M+1)), (tr(HΨ)+σ²)²/((M+1)²tr((HΨ)²))}·‖β*‖²_H`;
/// only the first branch when `tr((HΨ)²) = 0`.
pub fn gap_lower_bound(spec: &TaskSpec) -> f64 {
    let m1 = spec.context_len() as f64 + 1.0;
    let hp = spec.h().matrix() * spec.psi().matrix();
    let t2 = (&hp * &hp).trace();
    let first = 2.0 / (3.0 * m1);
    let factor = if t2 > 0.0 {
        let num = spec.signal() + spec.sigma2();
        first.max(num * num / (m1 * m1 * t2))
    } else {
        first
    };
    factor * spec.beta_star_h_norm2()
}

/// `E[XᵀX·A·XᵀX] = M·tr(HA)·H + M(M+1)·HAH` for rows `~ N(0, H)`.
pub fn fourth_moment_closed(h: &PsdMatrix, a: &Mat, m: usize) -> Result<Mat> {
    let d = h.dim();
    if a.shape() != (d, d) {
        return Err(IclError::dims("fourth_moment A", format!("{d}x{d}"), format!("{}x{}", a.nrows(), a.ncols())));
    }
    if m == 0 {
        return Err(IclError::InvalidArgument("M must be ≥ 1".into()));
    }
    let asym = (a - a.transpose()).norm();
    if asym > 1e-10 * a.norm().max(1.0) {
        return Err(IclError::NotSymmetric { asymmetry: asym });
    }
    let hm = h.matrix();
    let mf = m as f64;
    Ok(hm * (mf * (hm * a).trace()) + hm * a * hm * (mf * (mf + 1.0)))
}
