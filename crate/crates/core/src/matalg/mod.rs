//! Dense matrix foundations: Kronecker/Vec algebra, projection operators,
//! symmetric eigendecomposition and subspace geometry.
//!
//! Everything here is a pure function of its inputs.

mod basis;
mod eigen;
mod factor;
mod mat;

pub use basis::{canonical_signs, orthonormality_error, OrthonormalBasis, ORTHO_TOL};
pub use eigen::{
    generalized_sym_eig, inverse_sqrt_pd, psd_rank, sym_eig, sym_eigenvalues, EigDecomp,
    EIG_TIE_TOL, JACOBI_MAX_SWEEPS, JACOBI_REL_TOL,
};
pub use factor::{cholesky, cholesky_solve, pinv, range_basis, rank, thin_svd, ThinSvd};
pub use mat::{Mat, SymMat};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero
/// in every rank decision.
pub const RANK_TOL: f64 = 1e-10;

/// A symmetric matrix whose smallest eigenvalue is at most this fraction of
/// its largest is not positive definite.
pub const PD_TOL: f64 = 1e-12;

/// Largest number of elements [`kron`] will allocate.
pub const KRON_ELEMENT_BUDGET: usize = 100_000_000;

/// Kronecker product `A ⊗ B`: block (i, j) is `a_ij B`.
pub fn kron(a: &Mat, b: &Mat) -> Result<Mat> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    match rows.checked_mul(cols) {
        Some(n) if n <= KRON_ELEMENT_BUDGET => {}
        _ => {
            return Err(Error::KronBudget {
                rows,
                cols,
                budget: KRON_ELEMENT_BUDGET,
            })
        }
    }
    let (br, bc) = b.shape();
    Ok(Mat::from_fn(rows, cols, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    }))
}

/// Stacks the columns of `a` into one column vector.
pub fn vec(a: &Mat) -> Mat {
    let (r, c) = a.shape();
    Mat::from_fn(r * c, 1, |k, _| a[(k % r, k / r)])
}

/// Perpendicular projection operator onto `C(A)`, built from the
/// rank-revealing SVD so rank-deficient `A` is handled.
pub fn ppo(a: &Mat) -> Result<SymMat> {
    match range_basis(a)? {
        Some(u) => Ok(SymMat::gram(&u.transpose())),
        None => Ok(SymMat::zeros(a.rows())),
    }
}

/// `‖P_A − P_B‖_F / √(2d)`; 0 for equal column spaces, 1 for orthogonal ones.
pub fn subspace_distance(a: &OrthonormalBasis, b: &OrthonormalBasis) -> Result<f64> {
    if a.ambient_dim() != b.ambient_dim() || a.rank() != b.rank() {
        return Err(Error::Dimension(format!(
            "subspace distance between {}x{} and {}x{} bases",
            a.ambient_dim(),
            a.rank(),
            b.ambient_dim(),
            b.rank()
        )));
    }
    let diff = a.projector().sub(&b.projector())?;
    let d = a.rank() as f64;
    Ok((diff.frobenius_norm() / (2.0 * d).sqrt()).clamp(0.0, 1.0))
}

/// Checks positive definiteness by eigenvalues and returns them.
pub fn require_pd(s: &SymMat) -> Result<Vec<f64>> {
    let values = sym_eigenvalues(s)?;
    let max = values[0];
    let min = *values.last().expect("nonempty");
    if !(max > 0.0) || min <= PD_TOL * max {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {min:e}, largest {max:e}"
        )));
    }
    Ok(values)
}

/// `log |S|` for symmetric positive definite `S`, via the Cholesky factor.
pub fn logdet_pd(s: &SymMat) -> Result<f64> {
    require_pd(s)?;
    let l = cholesky(s.as_mat())?;
    Ok((0..s.dim()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0)
}
