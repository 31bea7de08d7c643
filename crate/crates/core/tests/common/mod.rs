#![allow(dead_code)]

use icl_core::predictors::{GdBetaParams, LsaParamsReduced, LtbParamsReduced};
use icl_core::task::{substream, TaskSpec};
use icl_core::{Mat, PsdMatrix, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn randn(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal) * scale)
}

pub fn randv(rng: &mut impl Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * scale)
}

/// `GGᵀ/rank` with `G` of size `d × rank`.
pub fn random_psd(rng: &mut impl Rng, d: usize, rank: usize) -> PsdMatrix {
    let g = randn(rng, d, rank, 1.0);
    PsdMatrix::new(&g * g.transpose() / rank.max(1) as f64).unwrap()
}

pub fn random_spec(rng: &mut ChaCha8Rng, d: usize, m: usize, sigma2: f64, rank_h: usize, rank_psi: usize) -> TaskSpec {
    let h = random_psd(rng, d, rank_h);
    let psi = random_psd(rng, d, rank_psi);
    let beta = randv(rng, d, 1.0);
    TaskSpec::new(h, psi, beta, sigma2, m).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    substream(seed, 999)
}

/// Nodes and weights of the 5-point Gauss–Hermite rule for `N(0, 1)`;
/// exact for polynomials up to degree 9.
fn gauss_hermite_5() -> ([f64; 5], [f64; 5]) {
    let a = (5.0 - 10f64.sqrt()).sqrt();
    let b = (5.0 + 10f64.sqrt()).sqrt();
    let nodes = [-b, -a, 0.0, a, b];
    // w = n! / (n² He_{n-1}(x)²), He_4(x) = x⁴ − 6x² + 3
    let he4 = |x: f64| x.powi(4) - 6.0 * x * x + 3.0;
    let mut w = [0.0; 5];
    for (wi, &x) in w.iter_mut().zip(&nodes) {
        *wi = 120.0 / (25.0 * he4(x).powi(2));
    }
    (nodes, w)
}

/// Linear readout `w = offset + L·G·p` of the second-moment matrix
/// `G = [[S, s], [sᵀ, c]]`; every implemented predictor has this form.
pub struct Readout {
    pub offset: Vector,
    pub l: Mat,
    pub p: Vector,
}

impl Readout {
    pub fn gd(p: &GdBetaParams) -> Self {
        let d = p.beta.len();
        let mut l = Mat::zeros(d, d + 1);
        l.view_mut((0, 0), (d, d)).copy_from(&p.gamma);
        let mut v = Vector::zeros(d + 1);
        v.rows_mut(0, d).copy_from(&(-&p.beta));
        v[d] = 1.0;
        Readout {
            offset: p.beta.clone(),
            l,
            p: v,
        }
    }

    pub fn lsa(p: &LsaParamsReduced) -> Self {
        let d = p.u12.len();
        let mut q = Mat::zeros(d + 1, d);
        q.view_mut((0, 0), (d, d)).copy_from(&p.u11);
        q.row_mut(d).copy_from(&p.u12.transpose());
        let mut v = Vector::zeros(d + 1);
        v.rows_mut(0, d).copy_from(&p.u21);
        v[d] = p.u_last;
        Readout {
            offset: Vector::zeros(d),
            l: q.transpose(),
            p: v,
        }
    }

    pub fn ltb(p: &LtbParamsReduced) -> Self {
        let mut r = Readout::lsa(&p.attention());
        r.offset = p.gamma.clone();
        r
    }
}

/// Exact risk: conditional on `β̃` the rows `(xᵢ, yᵢ)` are `N(0, C)` and
/// `E[GBG] = (1/M)tr(CB)C + ((M+1)/M)CBC`; `β̃` is integrated by tensor
/// Gauss–Hermite quadrature.
pub fn exact_risk(spec: &TaskSpec, r: &Readout) -> f64 {
    let d = spec.dim();
    let m = spec.context_len() as f64;
    let h = spec.h().matrix();
    let psi_sqrt = spec.psi_sqrt().matrix();
    let (nodes, weights) = gauss_hermite_5();

    let mut rr = Mat::zeros(d + 1, d + 1);
    rr.view_mut((0, 0), (d, d + 1)).copy_from(&r.l);
    let mut o = Vector::zeros(d + 1);
    o.rows_mut(0, d).copy_from(&r.offset);
    o[d] = -1.0;

    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let theta = Vector::from_fn(d, |i, _| nodes[idx[i]]);
        let weight: f64 = idx.iter().map(|&k| weights[k]).product();
        let bt = spec.beta_star() + psi_sqrt * theta;

        let hb = h * &bt;
        let mut c = Mat::zeros(d + 1, d + 1);
        c.view_mut((0, 0), (d, d)).copy_from(h);
        c.view_mut((0, d), (d, 1)).copy_from(&hb);
        c.view_mut((d, 0), (1, d)).copy_from(&hb.transpose());
        c[(d, d)] = bt.dot(&hb) + spec.sigma2();

        let b = rr.transpose() * &c * &rr;
        let egbg = &c * ((&c * &b).trace() / m) + &c * &b * &c * ((m + 1.0) / m);
        let cond = r.p.dot(&(egbg * &r.p)) + 2.0 * o.dot(&(&c * &rr * &c * &r.p)) + o.dot(&(&c * &o));
        total += weight * cond;

        let mut k = 0;
        loop {
            if k == d {
                return total;
            }
            idx[k] += 1;
            if idx[k] < 5 {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
