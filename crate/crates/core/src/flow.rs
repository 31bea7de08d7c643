//! Gradient flow of the GD-β population risk, `(β, Γ)' = −½∇R`, with
//! projected convergence metrics.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{IclError, Result};
use crate::linalg::{Mat, Vector};
use crate::predictors::GdBetaParams;
use crate::risk::closed_form::{excess_risk_with, h_gamma_raw, omega, optimal_gamma_with, OmegaMatrix};
use crate::task::TaskSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub beta: Vector,
    pub gamma: Mat,
}

impl FlowState {
    pub fn new(beta: Vector, gamma: Mat) -> Self {
        FlowState { t: 0.0, beta, gamma }
    }

    pub fn params(&self) -> GdBetaParams {
        GdBetaParams {
            beta: self.beta.clone(),
            gamma: self.gamma.clone(),
        }
    }

    fn is_finite(&self) -> bool {
        self.beta.iter().chain(self.gamma.iter()).all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowRhs {
    pub d_beta: Vector,
    pub d_gamma: Mat,
}

/// Quantities of the vector field that do not depend on the state.
struct FlowSystem<'a> {
    spec: &'a TaskSpec,
    omega: OmegaMatrix,
    /// `H^{1/2}ΩH^{1/2}`.
    h_omega_h: Mat,
    hpsih: Mat,
}

impl<'a> FlowSystem<'a> {
    fn new(spec: &'a TaskSpec) -> Result<Self> {
        let omega = omega(spec)?;
        let hs = spec.h_sqrt().matrix();
        let h_omega_h = hs * omega.matrix() * hs;
        let h = spec.h().matrix();
        let hpsih = h * spec.psi().matrix() * h;
        Ok(FlowSystem {
            spec,
            omega,
            h_omega_h,
            hpsih,
        })
    }

    fn rhs(&self, beta: &Vector, gamma: &Mat) -> FlowRhs {
        let spec = self.spec;
        let m = spec.context_len() as f64;
        let h = spec.h().matrix();
        let delta = beta - spec.beta_star();
        let hd = h * &delta;
        let hgh = h * gamma * h;

        let d_beta = -(h_gamma_raw(spec, gamma) * &delta);
        let outer = &hd * hd.transpose(); // Hδδᵀ H
        let d_gamma = -(h * gamma * &self.h_omega_h - &self.hpsih) - &hgh * &delta * hd.transpose() * ((m + 1.0) / m)
            - &hgh * (delta.dot(&hd) / m)
            + outer;
        FlowRhs { d_beta, d_gamma }
    }
}

/// `dβ = −H_Γδ`,
/// `dΓ = −(HΓH^{1/2}ΩH^{1/2} − HΨH) − ((M+1)/M)·HΓHδδᵀH − (δᵀHδ/M)·HΓH + HδδᵀH`.
pub fn flow_rhs(spec: &TaskSpec, s: &FlowState) -> Result<FlowRhs> {
    s.params().validate(spec.dim())?;
    Ok(FlowSystem::new(spec)?.rhs(&s.beta, &s.gamma))
}

/// `exp(−2λ₋₁t/(M+1))·‖𝒫_{Im(H)}(β0 − β*)‖²`, a bound on `‖𝒫_{Im(H)}(β(t) − β*)‖²`.
pub fn beta_rate_bound(spec: &TaskSpec, t: f64, beta0: &Vector) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(IclError::InvalidArgument(format!("t = {t} must be ≥ 0")));
    }
    let lam = spec.h().min_positive_eigenvalue()?;
    let dist = spec.h().project_image_vec(&(beta0 - spec.beta_star()))?.norm_squared();
    let m1 = spec.context_len() as f64 + 1.0;
    Ok((-2.0 * lam * t / m1).exp() * dist)
}

/// `min(0.05, 0.5/(λmax(Ω)·λmax(H) + λmax(H)²·‖β0 − β*‖² + 1))`.
pub fn default_dt(spec: &TaskSpec, beta0: &Vector) -> Result<f64> {
    let om = omega(spec)?;
    let lh = spec.h().max_eigenvalue();
    let dist = (beta0 - spec.beta_star()).norm_squared();
    Ok(0.05_f64.min(0.5 / (om.value().max_eigenvalue() * lh + lh * lh * dist + 1.0)))
}

/// Horizon at which the β bound reaches `beta_target / 2` (strictly below the
/// target) and the linearised Γ error (rate `λ₋₁(H)²·λmin(Ω)`) falls below `gamma_target`.
pub fn suggested_horizon(spec: &TaskSpec, init: &FlowState, beta_target: f64, gamma_target: f64) -> Result<f64> {
    let lam = spec.h().min_positive_eigenvalue()?;
    let om = omega(spec)?;
    let m1 = spec.context_len() as f64 + 1.0;
    let h = spec.h();
    let d0 = h.project_image_vec(&(&init.beta - spec.beta_star()))?.norm_squared();
    let t_beta = if d0 > 0.5 * beta_target {
        (2.0 * d0 / beta_target).ln() * m1 / (2.0 * lam)
    } else {
        0.0
    };
    let g0 = h
        .project_image_op(&(&init.gamma - optimal_gamma_with(spec, &om)))?
        .norm()
        .max(1.0);
    let om_min = om.value().spectral().eigenvalues()[spec.dim() - 1];
    let t_gamma = (g0 / gamma_target).ln() / (lam * lam * om_min);
    Ok(t_beta.max(t_gamma).max(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowMetrics {
    pub t: f64,
    pub excess_risk: f64,
    /// `‖𝒫_{Im(H)}(β − β*)‖`.
    pub beta_img_dist: f64,
    /// `‖𝒫_𝒵(Γ − Γ*)‖_F`.
    pub gamma_img_dist: f64,
    /// `‖𝒫_{Null(H)}(β − β(0))‖`.
    pub beta_null_drift: f64,
    /// `‖𝒫_{𝒵⊥}(Γ − Γ(0))‖_F`.
    pub gamma_null_drift: f64,
    /// Bound on `beta_img_dist²`; NaN when `H = 0`.
    pub rate_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrajectory {
    pub states: Vec<FlowState>,
    pub metrics: Vec<FlowMetrics>,
}

pub const TRAJECTORY_COLUMNS: [&str; 7] = [
    "t",
    "excess_risk",
    "beta_img_dist",
    "gamma_img_dist",
    "beta_null_drift",
    "gamma_null_drift",
    "rate_bound",
];

impl FlowTrajectory {
    pub fn final_state(&self) -> &FlowState {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn final_metrics(&self) -> &FlowMetrics {
        self.metrics.last().expect("trajectory holds at least the initial state")
    }

    /// One row per recorded state, floats in `{:.17e}`.
    pub fn to_csv(&self) -> String {
        let mut out = TRAJECTORY_COLUMNS.join(",");
        out.push('\n');
        for m in &self.metrics {
            let row = [
                m.t,
                m.excess_risk,
                m.beta_img_dist,
                m.gamma_img_dist,
                m.beta_null_drift,
                m.gamma_null_drift,
                m.rate_bound,
            ];
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

struct MetricContext<'a> {
    sys: &'a FlowSystem<'a>,
    gamma_star: Mat,
    init: FlowState,
    projector: Mat,
}

impl MetricContext<'_> {
    fn metrics(&self, s: &FlowState) -> FlowMetrics {
        let spec = self.sys.spec;
        let p = &self.projector;
        let db = &s.beta - spec.beta_star();
        let dg = &s.gamma - &self.gamma_star;
        let drift_b = &s.beta - &self.init.beta;
        let drift_g = &s.gamma - &self.init.gamma;
        FlowMetrics {
            t: s.t,
            excess_risk: excess_risk_with(spec, &self.sys.omega, &s.params()),
            beta_img_dist: (p * db).norm(),
            gamma_img_dist: (p * dg * p).norm(),
            beta_null_drift: (&drift_b - p * &drift_b).norm(),
            gamma_null_drift: (&drift_g - p * &drift_g * p).norm(),
            rate_bound: beta_rate_bound(spec, s.t, &self.init.beta).unwrap_or(f64::NAN),
        }
    }
}

/// Classical RK4 with `⌈T/dt⌉` equal steps ending exactly at `T`. Records the
/// initial state, every `record_every`-th step, and the final state.
pub fn integrate_flow(spec: &TaskSpec, init: &FlowState, dt: f64, t_end: f64, record_every: usize) -> Result<FlowTrajectory> {
    init.params().validate(spec.dim())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(IclError::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    if !(t_end > dt && t_end.is_finite()) {
        return Err(IclError::InvalidArgument(format!("T = {t_end} must exceed dt = {dt}")));
    }
    if record_every == 0 {
        return Err(IclError::InvalidArgument("record_every must be ≥ 1".into()));
    }
    if !init.is_finite() {
        return Err(IclError::NonFiniteInput);
    }
    let sys = FlowSystem::new(spec)?;
    let start = FlowState {
        t: 0.0,
        ..init.clone()
    };
    let ctx = MetricContext {
        sys: &sys,
        gamma_star: optimal_gamma_with(spec, &sys.omega),
        init: start.clone(),
        projector: spec.h().image_projector(),
    };

    let steps = (t_end / dt).ceil() as usize;
    let h = t_end / steps as f64;
    let mut states = vec![start.clone()];
    let mut metrics = vec![ctx.metrics(&start)];
    let mut cur = start;

    for k in 1..=steps {
        let k1 = sys.rhs(&cur.beta, &cur.gamma);
        let k2 = sys.rhs(
            &(&cur.beta + &k1.d_beta * (h / 2.0)),
            &(&cur.gamma + &k1.d_gamma * (h / 2.0)),
        );
        let k3 = sys.rhs(
            &(&cur.beta + &k2.d_beta * (h / 2.0)),
            &(&cur.gamma + &k2.d_gamma * (h / 2.0)),
        );
        let k4 = sys.rhs(&(&cur.beta + &k3.d_beta * h), &(&cur.gamma + &k3.d_gamma * h));
        let next = FlowState {
            t: if k == steps { t_end } else { k as f64 * h },
            beta: &cur.beta + (k1.d_beta + k2.d_beta * 2.0 + k3.d_beta * 2.0 + k4.d_beta) * (h / 6.0),
            gamma: &cur.gamma + (k1.d_gamma + k2.d_gamma * 2.0 + k3.d_gamma * 2.0 + k4.d_gamma) * (h / 6.0),
        };
        if !next.is_finite() {
            return Err(IclError::NonFiniteState {
                t: next.t,
                last_finite: Box::new(cur),
            });
        }
        cur = next;
        if k % record_every == 0 || k == steps {
            metrics.push(ctx.metrics(&cur));
            states.push(cur.clone());
        }
    }
    Ok(FlowTrajectory { states, metrics })
}
