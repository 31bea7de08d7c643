//! Linear-regression ICL episodes: the task distribution, prompt sampling
//! and the token-matrix embedding.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{IclError, Result};
use crate::linalg::{Mat, PsdMatrix, Vector};

/// Distributional parameters of an in-context regression task.
///
/// `β̃ ~ N(β*, Ψ)`, features `~ N(0, H)`, label noise `~ N(0, σ²)`, with `M`
/// context examples per prompt. Square roots of `H` and `Ψ` are computed once.
#[derive(Clone, Debug)]
pub struct TaskSpec {
    context_len: usize,
    h: PsdMatrix,
    psi: PsdMatrix,
    beta_star: Vector,
    sigma2: f64,
    h_sqrt: PsdMatrix,
    psi_sqrt: PsdMatrix,
}

impl TaskSpec {
    pub fn new(
        h: PsdMatrix,
        psi: PsdMatrix,
        beta_star: Vector,
        sigma2: f64,
        context_len: usize,
    ) -> Result<Self> {
        let d = h.dim();
        if context_len == 0 {
            return Err(IclError::InvalidSpec("context length M must be ≥ 1".into()));
        }
        if psi.dim() != d {
            return Err(IclError::dims("TaskSpec Ψ", d, psi.dim()));
        }
        if beta_star.len() != d {
            return Err(IclError::dims("TaskSpec β*", d, beta_star.len()));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(IclError::InvalidSpec(format!("σ² = {sigma2} must be finite and ≥ 0")));
        }
        if beta_star.iter().any(|v| !v.is_finite()) {
            return Err(IclError::InvalidSpec("β* has non-finite entries".into()));
        }
        let h_sqrt = h.sqrt();
        let psi_sqrt = psi.sqrt();
        Ok(TaskSpec {
            context_len,
            h,
            psi,
            beta_star,
            sigma2,
            h_sqrt,
            psi_sqrt,
        })
    }

    /// `H = Ψ = I`, `β* = 0`.
    pub fn isotropic(d: usize, context_len: usize, sigma2: f64) -> Result<Self> {
        Self::new(
            PsdMatrix::identity(d),
            PsdMatrix::identity(d),
            Vector::zeros(d),
            sigma2,
            context_len,
        )
    }

    pub fn with_beta_star(&self, beta_star: Vector) -> Result<Self> {
        Self::new(
            self.h.clone(),
            self.psi.clone(),
            beta_star,
            self.sigma2,
            self.context_len,
        )
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// Number of context examples `M`.
    pub fn context_len(&self) -> usize {
        self.context_len
    }

    pub fn h(&self) -> &PsdMatrix {
        &self.h
    }

    pub fn psi(&self) -> &PsdMatrix {
        &self.psi
    }

    pub fn h_sqrt(&self) -> &PsdMatrix {
        &self.h_sqrt
    }

    pub fn psi_sqrt(&self) -> &PsdMatrix {
        &self.psi_sqrt
    }

    pub fn beta_star(&self) -> &Vector {
        &self.beta_star
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `tr(HΨ)`.
    pub fn signal(&self) -> f64 {
        (self.h.matrix() * self.psi.matrix()).trace()
    }

    /// `‖β*‖²_H`.
    pub fn beta_star_h_norm2(&self) -> f64 {
        self.beta_star.dot(&(self.h.matrix() * &self.beta_star))
    }
}

/// One sampled episode. `beta_task` is the latent `β̃`, kept for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Prompt {
    pub context_x: Mat,
    pub context_y: Vector,
    pub query_x: Vector,
    pub query_y: f64,
    pub beta_task: Vector,
}

/// The `(d+1) × (M+1)` input `[[Xᵀ, x], [yᵀ, 0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenMatrix(Mat);

impl TokenMatrix {
    pub fn from_matrix(e: Mat) -> Result<Self> {
        if e.nrows() < 2 || e.ncols() < 2 {
            return Err(IclError::dims("TokenMatrix", "at least 2x2", format!("{}x{}", e.nrows(), e.ncols())));
        }
        let (r, c) = (e.nrows() - 1, e.ncols() - 1);
        if e[(r, c)] != 0.0 {
            return Err(IclError::InvalidArgument(
                "token matrix must have a zero bottom-right entry".into(),
            ));
        }
        Ok(TokenMatrix(e))
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows() - 1
    }

    pub fn context_len(&self) -> usize {
        self.0.ncols() - 1
    }

    /// `X`, `M × d`.
    pub fn context_x(&self) -> Mat {
        let (d, m) = (self.dim(), self.context_len());
        self.0.view((0, 0), (d, m)).transpose()
    }

    pub fn context_y(&self) -> Vector {
        let (d, m) = (self.dim(), self.context_len());
        self.0.row(d).columns(0, m).transpose()
    }

    pub fn query_x(&self) -> Vector {
        let (d, m) = (self.dim(), self.context_len());
        self.0.column(m).rows(0, d).into_owned()
    }
}

/// Independent ChaCha substream for `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Draws `β̃ = β* + Ψ^{1/2}θ`, rows `H^{1/2}z`, and labels with `N(0, σ²)` noise.
/// Square-root factors keep this valid for rank-deficient `H` and `Ψ`.
pub fn sample_prompt<R: Rng + ?Sized>(spec: &TaskSpec, rng: &mut R) -> Prompt {
    let d = spec.dim();
    let m = spec.context_len();
    let noise_sd = spec.sigma2().sqrt();

    let theta = standard_normal_vec(rng, d);
    let beta_task = spec.beta_star() + spec.psi_sqrt().matrix() * theta;

    let z = Mat::from_fn(m, d, |_, _| rng.sample(StandardNormal));
    // rows of Z·H^{1/2} are H^{1/2}z_i since H^{1/2} is symmetric
    let context_x = z * spec.h_sqrt().matrix();
    let query_x = spec.h_sqrt().matrix() * standard_normal_vec(rng, d);

    let noise = standard_normal_vec(rng, m) * noise_sd;
    let context_y = &context_x * &beta_task + noise;
    let query_noise: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sd;
    let query_y = beta_task.dot(&query_x) + query_noise;

    Prompt {
        context_x,
        context_y,
        query_x,
        query_y,
        beta_task,
    }
}

/// Lays out `E`; the query label never enters it.
pub fn build_token_matrix(p: &Prompt) -> TokenMatrix {
    let (m, d) = (p.context_x.nrows(), p.context_x.ncols());
    let mut e = Mat::zeros(d + 1, m + 1);
    e.view_mut((0, 0), (d, m)).copy_from(&p.context_x.transpose());
    e.view_mut((0, m), (d, 1)).copy_from(&p.query_x);
    e.view_mut((d, 0), (1, m)).copy_from(&p.context_y.transpose());
    TokenMatrix(e)
}

/// `diag(I_M, 0)`.
pub fn mask_matrix(m: usize) -> Mat {
    let mut mask = Mat::identity(m + 1, m + 1);
    mask[(m, m)] = 0.0;
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_2d(sigma2: f64) -> TaskSpec {
        TaskSpec::isotropic(2, 3, sigma2).unwrap()
    }

    #[test]
    fn degenerate_prior_and_noise() {
        let spec = TaskSpec::new(
            PsdMatrix::identity(3),
            PsdMatrix::zeros(3),
            Vector::from_vec(vec![1.0, -2.0, 0.5]),
            0.0,
            4,
        )
        .unwrap();
        let mut rng = substream(1, 0);
        for _ in 0..20 {
            let p = sample_prompt(&spec, &mut rng);
            assert_eq!(&p.beta_task, spec.beta_star());
            assert!((&p.context_x * spec.beta_star() - &p.context_y).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_features() {
        let spec = TaskSpec::new(
            PsdMatrix::zeros(2),
            PsdMatrix::identity(2),
            Vector::zeros(2),
            1.0,
            5,
        )
        .unwrap();
        let p = sample_prompt(&spec, &mut substream(3, 0));
        assert_eq!(p.context_x, Mat::zeros(5, 2));
        assert_eq!(p.query_x, Vector::zeros(2));
        assert!(p.context_y.iter().all(|v| v.abs() > 0.0));
    }

    #[test]
    fn token_matrix_layout() {
        let p = Prompt {
            context_x: Mat::from_row_slice(1, 1, &[2.0]),
            context_y: Vector::from_vec(vec![3.0]),
            query_x: Vector::from_vec(vec![1.0]),
            query_y: 7.0,
            beta_task: Vector::zeros(1),
        };
        let e = build_token_matrix(&p);
        assert_eq!(e.matrix(), &Mat::from_row_slice(2, 2, &[2.0, 1.0, 3.0, 0.0]));

        let zero = Prompt {
            context_x: Mat::zeros(4, 3),
            context_y: Vector::zeros(4),
            query_x: Vector::zeros(3),
            query_y: 0.0,
            beta_task: Vector::zeros(3),
        };
        assert_eq!(build_token_matrix(&zero).matrix(), &Mat::zeros(4, 5));
    }

    #[test]
    fn token_matrix_round_trip() {
        let spec = spec_2d(0.5);
        let mut rng = substream(9, 2);
        for _ in 0..10 {
            let p = sample_prompt(&spec, &mut rng);
            let e = build_token_matrix(&p);
            assert_eq!(e.context_x(), p.context_x);
            assert_eq!(e.context_y(), p.context_y);
            assert_eq!(e.query_x(), p.query_x);
            assert_eq!(e.matrix()[(2, 3)], 0.0);
        }
    }

    #[test]
    fn mask_examples() {
        assert_eq!(mask_matrix(1), Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(mask_matrix(2), Mat::from_diagonal(&Vector::from_vec(vec![1.0, 1.0, 0.0])));
        for m in 1..10 {
            assert_eq!(mask_matrix(m).trace(), m as f64);
        }
    }

    #[test]
    fn identical_seed_is_bit_identical() {
        let spec = spec_2d(1.0);
        let a: Vec<Prompt> = {
            let mut rng = substream(42, 7);
            (0..5).map(|_| sample_prompt(&spec, &mut rng)).collect()
        };
        let b: Vec<Prompt> = {
            let mut rng = substream(42, 7);
            (0..5).map(|_| sample_prompt(&spec, &mut rng)).collect()
        };
        assert_eq!(a, b);
        let c = sample_prompt(&spec, &mut substream(42, 8));
        assert_ne!(a[0], c);
    }

    #[test]
    fn task_prior_covariance_matches() {
        // 10⁵ draws of β̃ with Ψ = I: each covariance entry has standard error ≈ 1/√n
        let spec = TaskSpec::isotropic(2, 1, 1.0).unwrap();
        let n = 100_000;
        let mut rng = substream(2024, 0);
        let mut sum = Vector::zeros(2);
        let mut outer = Mat::zeros(2, 2);
        for _ in 0..n {
            let b = sample_prompt(&spec, &mut rng).beta_task;
            sum += &b;
            outer += &b * b.transpose();
        }
        let nf = n as f64;
        let mean = sum / nf;
        let cov = outer / nf - &mean * mean.transpose();
        for i in 0..2 {
            assert!(mean[i].abs() < 3.0 / nf.sqrt());
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                let se = if i == j { (2.0 / nf).sqrt() } else { 1.0 / nf.sqrt() };
                assert!((cov[(i, j)] - target).abs() < 3.0 * se, "cov[{i},{j}] = {}", cov[(i, j)]);
            }
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(TaskSpec::isotropic(2, 0, 1.0).is_err());
        assert!(TaskSpec::isotropic(2, 3, -1.0).is_err());
        assert!(TaskSpec::new(
            PsdMatrix::identity(2),
            PsdMatrix::identity(3),
            Vector::zeros(2),
            1.0,
            2
        )
        .is_err());
    }
}
