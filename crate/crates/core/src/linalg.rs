//! Rank-aware dense PSD matrix utilities.
//!
//! Every [`PsdMatrix`] carries one symmetric eigendecomposition computed at
//! construction. Square roots, pseudo-inverses and the projections onto
//! `Im(H)` and onto the image of `Z ↦ HZH` are all derived from it, so rank
//! decisions are consistent across every derived quantity.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{IclError, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalues at or below `RANK_TOL * λmax` are treated as exact zeros.
pub const RANK_TOL: f64 = 1e-10;

/// Inputs whose relative asymmetry exceeds this are rejected rather than
/// symmetrized.
const SYMMETRY_REJECT_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vector,
    eigenvectors: Mat,
    rank: usize,
}

impl SpectralDecomposition {
    /// Nonincreasing eigenvalues; clamped ones are exactly zero.
    pub fn eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, column `i` pairs with eigenvalue `i`.
    pub fn eigenvectors(&self) -> &Mat {
        &self.eigenvectors
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `Q · diag(f(λ)) · Qᵀ`.
    fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        &scaled * q.transpose()
    }

    /// Orthonormal basis of the image, `d × rank`.
    fn image_basis(&self) -> Mat {
        self.eigenvectors.columns(0, self.rank).into_owned()
    }
}

/// Symmetric positive semi-definite matrix with a cached eigendecomposition.
#[derive(Clone, Debug)]
pub struct PsdMatrix {
    matrix: Mat,
    spectral: Arc<SpectralDecomposition>,
}

impl PsdMatrix {
    /// Symmetrizes `a` as `(a + aᵀ)/2`, decomposes it and clamps eigenvalues
    /// below `RANK_TOL · λmax` to zero.
    pub fn new(a: Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(IclError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(IclError::NonFiniteInput);
        }
        let scale = a.norm();
        let sym = (&a + a.transpose()) * 0.5;
        if scale > 0.0 {
            let asymmetry = (&a - a.transpose()).norm() / scale;
            if asymmetry > SYMMETRY_REJECT_TOL {
                return Err(IclError::NotSymmetric { asymmetry });
            }
        }
        let d = sym.nrows();
        if d == 0 {
            return Err(IclError::InvalidArgument("empty matrix".into()));
        }

        let eig = sym.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

        let lambda_max = eig.eigenvalues[order[0]].max(0.0);
        let cutoff = RANK_TOL * lambda_max;
        let mut eigenvalues = Vector::zeros(d);
        let mut eigenvectors = Mat::zeros(d, d);
        let mut clamped = false;
        let mut rank = 0;
        for (k, &i) in order.iter().enumerate() {
            let lam = eig.eigenvalues[i];
            if lam < -RANK_TOL * scale {
                return Err(IclError::NotPositiveSemidefinite { eigenvalue: lam });
            }
            if lam > cutoff && lam > 0.0 {
                eigenvalues[k] = lam;
                rank += 1;
            } else {
                clamped |= lam != 0.0;
            }
            eigenvectors.set_column(k, &eig.eigenvectors.column(i));
        }

        let spectral = SpectralDecomposition {
            eigenvalues,
            eigenvectors,
            rank,
        };
        let matrix = if clamped { spectral.map(|l| l) } else { sym };
        Ok(PsdMatrix {
            matrix,
            spectral: Arc::new(spectral),
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::diagonal(&vec![1.0; d]).expect("identity is PSD")
    }

    pub fn zeros(d: usize) -> Self {
        Self::diagonal(&vec![0.0; d]).expect("zero is PSD")
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(Mat::from_diagonal(&Vector::from_column_slice(values)))
    }

    fn from_spectral(spectral: SpectralDecomposition) -> Self {
        let matrix = spectral.map(|l| l);
        PsdMatrix {
            matrix,
            spectral: Arc::new(spectral),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn rank(&self) -> usize {
        self.spectral.rank
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.spectral.eigenvalues[0]
    }

    /// Smallest eigenvalue that survived the rank cutoff.
    pub fn min_positive_eigenvalue(&self) -> Result<f64> {
        match self.spectral.rank {
            0 => Err(IclError::NoPositiveEigenvalue),
            r => Ok(self.spectral.eigenvalues[r - 1]),
        }
    }

    /// Principal square root; shares eigenvectors and rank with `self`.
    pub fn sqrt(&self) -> PsdMatrix {
        let s = &self.spectral;
        PsdMatrix::from_spectral(SpectralDecomposition {
            eigenvalues: s.eigenvalues.map(f64::sqrt),
            eigenvectors: s.eigenvectors.clone(),
            rank: s.rank,
        })
    }

    /// Moore–Penrose pseudo-inverse; clamped eigenvalues map to zero.
    pub fn pinv(&self) -> PsdMatrix {
        let s = &self.spectral;
        PsdMatrix::from_spectral(SpectralDecomposition {
            eigenvalues: s.eigenvalues.map(|l| if l > 0.0 { 1.0 / l } else { 0.0 }),
            eigenvectors: s.eigenvectors.clone(),
            rank: s.rank,
        })
    }

    /// `(A^{1/2})⁺`, written `A^{-1/2}` for rank-deficient `A`.
    pub fn pinv_sqrt(&self) -> PsdMatrix {
        let s = &self.spectral;
        PsdMatrix::from_spectral(SpectralDecomposition {
            eigenvalues: s
                .eigenvalues
                .map(|l| if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 }),
            eigenvectors: s.eigenvectors.clone(),
            rank: s.rank,
        })
    }

    /// `A A⁺`, the orthogonal projector onto `Im(A)`.
    pub fn image_projector(&self) -> Mat {
        let basis = self.spectral.image_basis();
        &basis * basis.transpose()
    }

    pub fn project_image_vec(&self, v: &Vector) -> Result<Vector> {
        self.check_vec(v, "project_image_vec")?;
        let basis = self.spectral.image_basis();
        Ok(&basis * (basis.transpose() * v))
    }

    pub fn project_null_vec(&self, v: &Vector) -> Result<Vector> {
        Ok(v - self.project_image_vec(v)?)
    }

    /// `A A⁺ · Z · A⁺ A`, the projection onto the image of `Z ↦ AZA`.
    pub fn project_image_op(&self, z: &Mat) -> Result<Mat> {
        self.check_mat(z, "project_image_op")?;
        let p = self.image_projector();
        Ok(&p * z * &p)
    }

    /// Component of `Z` in the null space of `Z ↦ AZA`.
    pub fn project_null_op(&self, z: &Mat) -> Result<Mat> {
        Ok(z - self.project_image_op(z)?)
    }

    fn check_vec(&self, v: &Vector, context: &'static str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(IclError::dims(context, self.dim(), v.len()));
        }
        Ok(())
    }

    fn check_mat(&self, z: &Mat, context: &'static str) -> Result<()> {
        if z.nrows() != self.dim() || z.ncols() != self.dim() {
            return Err(IclError::dims(
                context,
                format!("{0}x{0}", self.dim()),
                format!("{}x{}", z.nrows(), z.ncols()),
            ));
        }
        Ok(())
    }
}

pub fn principal_sqrt(a: &PsdMatrix) -> PsdMatrix {
    a.sqrt()
}

pub fn pseudo_inverse(a: &PsdMatrix) -> PsdMatrix {
    a.pinv()
}

pub fn project_image_vec(h: &PsdMatrix, v: &Vector) -> Result<Vector> {
    h.project_image_vec(v)
}

pub fn project_image_op(h: &PsdMatrix, z: &Mat) -> Result<Mat> {
    h.project_image_op(z)
}

pub fn min_positive_eigenvalue(a: &PsdMatrix) -> Result<f64> {
    a.min_positive_eigenvalue()
}

/// Relative Frobenius error `‖a − b‖ / max(‖b‖, 1e-300)`.
pub fn rel_frobenius(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
