//! Forward maps of GD-β, LSA and LTB on token matrices, and the maps between
//! full LTB weights and their effective (reduced) parameters.

use crate::error::{IclError, Result};
use crate::linalg::{Mat, Vector};
use crate::task::{mask_matrix, Prompt, TokenMatrix};

/// One GD step from `beta` with matrix stepsize `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct GdBetaParams {
    pub beta: Vector,
    pub gamma: Mat,
}

/// Entries of the LSA weight products that reach the prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct LsaParamsReduced {
    pub u11: Mat,
    pub u12: Vector,
    pub u21: Vector,
    pub u_last: f64,
}

/// Entries of the LTB weight products that reach the prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct LtbParamsReduced {
    pub v11: Mat,
    pub v12: Vector,
    pub v21: Vector,
    pub v_last: f64,
    pub gamma: Vector,
}

/// Full LTB weights. `w_k, w_q: d_k×(d+1)`, `w_p, w_v: d_v×(d+1)`, `w1, w2: d_f×(d+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LtbWeights {
    pub w_k: Mat,
    pub w_q: Mat,
    pub w_p: Mat,
    pub w_v: Mat,
    pub w1: Mat,
    pub w2: Mat,
}

fn check_vec(context: &'static str, v: &Vector, d: usize) -> Result<()> {
    if v.len() != d {
        return Err(IclError::dims(context, d, v.len()));
    }
    Ok(())
}

fn check_square(context: &'static str, m: &Mat, d: usize) -> Result<()> {
    if m.shape() != (d, d) {
        return Err(IclError::dims(context, format!("{d}x{d}"), format!("{}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

impl GdBetaParams {
    pub fn new(beta: Vector, gamma: Mat) -> Result<Self> {
        let p = GdBetaParams { beta, gamma };
        p.validate(p.beta.len())?;
        Ok(p)
    }

    pub fn zeros(d: usize) -> Self {
        GdBetaParams {
            beta: Vector::zeros(d),
            gamma: Mat::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        check_vec("GD-β β", &self.beta, d)?;
        check_square("GD-β Γ", &self.gamma, d)
    }
}

impl LsaParamsReduced {
    pub fn zeros(d: usize) -> Self {
        LsaParamsReduced {
            u11: Mat::zeros(d, d),
            u12: Vector::zeros(d),
            u21: Vector::zeros(d),
            u_last: 0.0,
        }
    }

    /// `u−1 = 1`, `U11 = Γᵀ`: the GD-0 predictor with stepsize `Γ`.
    pub fn gd_zero(gamma: &Mat) -> Self {
        let d = gamma.nrows();
        LsaParamsReduced {
            u11: gamma.transpose(),
            u12: Vector::zeros(d),
            u21: Vector::zeros(d),
            u_last: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.u12.len()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        check_square("LSA U11", &self.u11, d)?;
        check_vec("LSA u12", &self.u12, d)?;
        check_vec("LSA u21", &self.u21, d)
    }

    /// Layout `[vec(U11) column-major, u12, u21, u−1]`, length `d² + 2d + 1`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.u11.len() + 2 * self.u12.len() + 1);
        out.extend_from_slice(self.u11.as_slice());
        out.extend_from_slice(self.u12.as_slice());
        out.extend_from_slice(self.u21.as_slice());
        out.push(self.u_last);
        out
    }

    pub fn from_flat(d: usize, theta: &[f64]) -> Result<Self> {
        let n = d * d + 2 * d + 1;
        if theta.len() != n {
            return Err(IclError::dims("LSA flat parameters", n, theta.len()));
        }
        let dd = d * d;
        Ok(LsaParamsReduced {
            u11: Mat::from_column_slice(d, d, &theta[..dd]),
            u12: Vector::from_column_slice(&theta[dd..dd + d]),
            u21: Vector::from_column_slice(&theta[dd + d..dd + 2 * d]),
            u_last: theta[n - 1],
        })
    }
}

impl LtbParamsReduced {
    pub fn zeros(d: usize) -> Self {
        LtbParamsReduced {
            v11: Mat::zeros(d, d),
            v12: Vector::zeros(d),
            v21: Vector::zeros(d),
            v_last: 0.0,
            gamma: Vector::zeros(d),
        }
    }

    /// LSA blocks plus a linear readout `γ`.
    pub fn from_lsa(p: &LsaParamsReduced, gamma: Vector) -> Self {
        LtbParamsReduced {
            v11: p.u11.clone(),
            v12: p.u12.clone(),
            v21: p.u21.clone(),
            v_last: p.u_last,
            gamma,
        }
    }

    /// The attention part as LSA parameters.
    pub fn attention(&self) -> LsaParamsReduced {
        LsaParamsReduced {
            u11: self.v11.clone(),
            u12: self.v12.clone(),
            u21: self.v21.clone(),
            u_last: self.v_last,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.attention().validate(d)?;
        check_vec("LTB γ", &self.gamma, d)
    }
}

impl LtbWeights {
    /// `d` inferred from the column count `d+1`.
    pub fn dim(&self) -> usize {
        self.w_k.ncols().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let cols = self.w_k.ncols();
        if cols < 2 {
            return Err(IclError::InvalidWeights(format!(
                "weights must have d+1 ≥ 2 columns, got {cols}"
            )));
        }
        let d = cols - 1;
        let named = [
            ("W_K", &self.w_k),
            ("W_Q", &self.w_q),
            ("W_P", &self.w_p),
            ("W_V", &self.w_v),
            ("W_1", &self.w1),
            ("W_2", &self.w2),
        ];
        for (name, w) in named {
            if w.ncols() != cols {
                return Err(IclError::InvalidWeights(format!(
                    "{name} has {} columns, expected {cols}",
                    w.ncols()
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(IclError::InvalidWeights(format!("{name} has non-finite entries")));
            }
        }
        let pairs = [
            ("W_K/W_Q", &self.w_k, &self.w_q, d, "d_k ≥ d"),
            ("W_P/W_V", &self.w_p, &self.w_v, d + 1, "d_v ≥ d+1"),
            ("W_1/W_2", &self.w1, &self.w2, 1, "d_f ≥ 1"),
        ];
        for (name, a, b, min_rows, rule) in pairs {
            if a.nrows() != b.nrows() {
                return Err(IclError::InvalidWeights(format!(
                    "{name} row counts differ: {} vs {}",
                    a.nrows(),
                    b.nrows()
                )));
            }
            if a.nrows() < min_rows {
                return Err(IclError::InvalidWeights(format!(
                    "{name} has {} rows, violating {rule}",
                    a.nrows()
                )));
            }
        }
        Ok(())
    }
}

/// Sufficient statistics of a context: `S = XᵀX/M`, `s = Xᵀy/M`, `c = yᵀy/M`.
struct ContextStats {
    s_mat: Mat,
    s_vec: Vector,
    c: f64,
}

impl ContextStats {
    fn new(x: &Mat, y: &Vector) -> Self {
        let m = x.nrows() as f64;
        ContextStats {
            s_mat: x.tr_mul(x) / m,
            s_vec: x.tr_mul(y) / m,
            c: y.dot(y) / m,
        }
    }
}

/// Effective linear readout of the attention term: prediction is `⟨w, x⟩`.
fn attention_readout(u11: &Mat, u12: &Vector, u21: &Vector, u_last: f64, st: &ContextStats) -> Vector {
    let mut w = u11.tr_mul(&(&st.s_mat * u21 + &st.s_vec * u_last));
    w.axpy(u21.dot(&st.s_vec) + u_last * st.c, u12, 1.0);
    w
}

fn check_prompt(context: &'static str, x: &Mat, y: &Vector, q: &Vector, d: usize) -> Result<()> {
    if x.ncols() != d || q.len() != d {
        return Err(IclError::dims(context, d, x.ncols()));
    }
    if y.len() != x.nrows() {
        return Err(IclError::dims(context, x.nrows(), y.len()));
    }
    if x.nrows() == 0 {
        return Err(IclError::InvalidArgument("empty context".into()));
    }
    Ok(())
}

fn gd_beta_parts(p: &GdBetaParams, x: &Mat, y: &Vector, q: &Vector) -> Result<f64> {
    p.validate(x.ncols())?;
    check_prompt("GD-β prompt", x, y, q, p.dim())?;
    let m = x.nrows() as f64;
    let resid = x * &p.beta - y;
    let grad = x.tr_mul(&resid) / m;
    Ok((&p.beta - &p.gamma * grad).dot(q))
}

fn lsa_parts(p: &LsaParamsReduced, x: &Mat, y: &Vector, q: &Vector) -> Result<f64> {
    p.validate(x.ncols())?;
    check_prompt("LSA prompt", x, y, q, p.dim())?;
    let st = ContextStats::new(x, y);
    Ok(attention_readout(&p.u11, &p.u12, &p.u21, p.u_last, &st).dot(q))
}

fn ltb_parts(p: &LtbParamsReduced, x: &Mat, y: &Vector, q: &Vector) -> Result<f64> {
    p.validate(x.ncols())?;
    check_prompt("LTB prompt", x, y, q, p.dim())?;
    let st = ContextStats::new(x, y);
    Ok(attention_readout(&p.v11, &p.v12, &p.v21, p.v_last, &st).dot(q) + p.gamma.dot(q))
}

/// `⟨β − Γ·Xᵀ(Xβ − y)/M, x⟩`.
pub fn predict_gd_beta(p: &GdBetaParams, e: &TokenMatrix) -> Result<f64> {
    gd_beta_parts(p, &e.context_x(), &e.context_y(), &e.query_x())
}

pub fn predict_lsa(p: &LsaParamsReduced, e: &TokenMatrix) -> Result<f64> {
    lsa_parts(p, &e.context_x(), &e.context_y(), &e.query_x())
}

pub fn predict_ltb_reduced(p: &LtbParamsReduced, e: &TokenMatrix) -> Result<f64> {
    ltb_parts(p, &e.context_x(), &e.context_y(), &e.query_x())
}

/// Same as [`predict_gd_beta`] but reads the prompt directly.
pub fn predict_gd_beta_prompt(p: &GdBetaParams, pr: &Prompt) -> Result<f64> {
    gd_beta_parts(p, &pr.context_x, &pr.context_y, &pr.query_x)
}

pub fn predict_lsa_prompt(p: &LsaParamsReduced, pr: &Prompt) -> Result<f64> {
    lsa_parts(p, &pr.context_x, &pr.context_y, &pr.query_x)
}

pub fn predict_ltb_reduced_prompt(p: &LtbParamsReduced, pr: &Prompt) -> Result<f64> {
    ltb_parts(p, &pr.context_x, &pr.context_y, &pr.query_x)
}

/// Bottom-right entry of `W₂ᵀW₁(E + W_PᵀW_V·E·mask·EᵀW_KᵀW_Q·E / M)`.
pub fn predict_ltb_full(w: &LtbWeights, e: &TokenMatrix) -> Result<f64> {
    w.validate()?;
    let em = e.matrix();
    if em.nrows() != w.w_k.ncols() {
        return Err(IclError::dims("LTB token matrix rows", w.w_k.ncols(), em.nrows()));
    }
    let m = e.context_len();
    let kq = w.w_k.tr_mul(&w.w_q);
    let pv = w.w_p.tr_mul(&w.w_v);
    let attn = &pv * em * mask_matrix(m) * em.transpose() * kq * em / m as f64;
    let out = w.w2.tr_mul(&w.w1) * (em + attn);
    Ok(out[(em.nrows() - 1, em.ncols() - 1)])
}

/// Canonical LTB weights realising `p` with `d_k = d`, `d_v = d_f = d+1`.
///
/// `W_KᵀW_Q` carries `Γᵀ` in its top-left block: the attention readout is
/// `(s − Sβ)ᵀ·V11·x`, which equals `xᵀΓ(s − Sβ)` only for `V11 = Γᵀ`.
pub fn embed_gd_beta_in_ltb(p: &GdBetaParams) -> LtbWeights {
    let d = p.dim();
    let mut readout = Mat::zeros(d + 1, d + 1);
    readout.view_mut((d, 0), (1, d)).copy_from(&p.beta.transpose());
    readout[(d, d)] = 1.0;

    let mut w_v = Mat::identity(d + 1, d + 1);
    for i in 0..d {
        w_v[(i, i)] = -1.0;
    }

    let mut w_k = Mat::zeros(d, d + 1);
    w_k.view_mut((0, 0), (d, d)).fill_with_identity();
    let mut w_q = Mat::zeros(d, d + 1);
    w_q.view_mut((0, 0), (d, d)).copy_from(&p.gamma.transpose());

    LtbWeights {
        w_k,
        w_q,
        w_p: Mat::identity(d + 1, d + 1),
        w_v,
        w1: Mat::identity(d + 1, d + 1),
        w2: readout.transpose(),
    }
}

/// Reads the effective parameters off the weight products.
pub fn reduce_ltb_weights(w: &LtbWeights) -> Result<LtbParamsReduced> {
    w.validate()?;
    let d = w.dim();
    let p1 = w.w2.tr_mul(&w.w1);
    let p2 = &p1 * w.w_p.tr_mul(&w.w_v);
    let kq = w.w_k.tr_mul(&w.w_q);
    Ok(LtbParamsReduced {
        v11: kq.view((0, 0), (d, d)).into_owned(),
        v12: kq.row(d).columns(0, d).transpose(),
        v21: p2.row(d).columns(0, d).transpose(),
        v_last: p2[(d, d)],
        gamma: p1.row(d).columns(0, d).transpose(),
    })
}
