//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use std::cmp::Ordering;

use crate::error::{Error, Result};

use super::{basis::canonical_signs, factor, Mat, OrthonormalBasis, SymMat, RANK_TOL};

/// Sweep cap for the Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Convergence when the off-diagonal Frobenius norm is at most this
/// multiple of `‖S‖_F`.
pub const JACOBI_REL_TOL: f64 = 1e-12;
/// Eigenvalues closer than this (relative to `max(1, |λ|)`) count as tied.
pub const EIG_TIE_TOL: f64 = 1e-10;

/// Eigenvalues sorted non-increasing with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigDecomp {
    pub values: Vec<f64>,
    pub vectors: OrthonormalBasis,
}

impl EigDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// First `d` eigenvectors.
    pub fn leading(&self, d: usize) -> OrthonormalBasis {
        let idx: Vec<usize> = (0..d).collect();
        self.vectors.select(&idx).expect("d within dimension")
    }

    /// `V Λ V'`.
    pub fn reconstruct(&self) -> SymMat {
        let v = self.vectors.as_mat();
        let vl = Mat::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] * self.values[j]);
        SymMat::symmetrize(&vl.matmul(&v.transpose()).expect("square")).expect("square")
    }
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Values are sorted descending. Eigenvalues tied within [`EIG_TIE_TOL`]
/// are ordered by lexicographically descending (canonically signed)
/// eigenvector, so the output is a deterministic function of the input.
pub fn sym_eig(s: &SymMat) -> Result<EigDecomp> {
    let n = s.dim();
    let mut a = s.as_mat().clone();
    let mut v = Mat::identity(n);
    let threshold = JACOBI_REL_TOL * s.frobenius_norm();

    let mut sweeps = 0;
    loop {
        if off_diagonal_norm(&a) <= threshold {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)] != 0.0 {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let raw: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let v = canonical_signs(v);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| raw[y].total_cmp(&raw[x]).then(x.cmp(&y)));

    // re-order runs of tied eigenvalues by eigenvector
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && is_tied(raw[order[end - 1]], raw[order[end]]) {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|&x, &y| lex_cmp(&v.column(y), &v.column(x)));
        }
        start = end;
    }

    let values = order.iter().map(|&k| raw[k]).collect();
    let vectors = OrthonormalBasis::new(v.select_columns(&order))?;
    Ok(EigDecomp { values, vectors })
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(s: &SymMat) -> Result<Vec<f64>> {
    Ok(sym_eig(s)?.values)
}

fn is_tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= EIG_TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

fn off_diagonal_norm(a: &Mat) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Applies the rotation annihilating `a[p][q]`, accumulating it into `v`.
fn rotate(a: &mut Mat, v: &mut Mat, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if theta.is_finite() {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        // |theta| overflowed: the rotation angle is tiny
        1.0 / (2.0 * theta)
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Solutions of `A v = λ B v` for symmetric `A` and positive definite `B`,
/// values descending. Computed from `B^{-1/2} A B^{-1/2}` and mapped back
/// through `B^{-1/2}`; returned vectors have unit Euclidean norm.
pub fn generalized_sym_eig(a: &SymMat, b: &SymMat) -> Result<(Vec<f64>, Mat)> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "generalized eigenproblem with {}x{} and {}x{}",
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )));
    }
    let inv_sqrt = inverse_sqrt_pd(b)?;
    let whitened = a.congruence(inv_sqrt.as_mat())?;
    let eig = sym_eig(&whitened)?;
    let back = inv_sqrt.as_mat().matmul(eig.vectors.as_mat())?;
    let q = back.rows();
    let mut vectors = back.clone();
    for j in 0..q {
        let nrm = factor::dot(&back.column(j), &back.column(j)).sqrt();
        for i in 0..q {
            vectors[(i, j)] = back[(i, j)] / nrm;
        }
    }
    Ok((eig.values, canonical_signs(vectors)))
}

/// `S^{-1/2}` for positive definite `S`.
pub fn inverse_sqrt_pd(s: &SymMat) -> Result<SymMat> {
    let eig = sym_eig(s)?;
    let max = eig.values[0];
    let min = *eig.values.last().expect("nonempty");
    if !(max > 0.0) || min <= super::PD_TOL * max {
        return Err(Error::NotPositiveDefinite(format!(
            "eigenvalues span [{min:e}, {max:e}]"
        )));
    }
    let v = eig.vectors.as_mat();
    let scaled = Mat::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] / eig.values[j].sqrt());
    SymMat::symmetrize(&scaled.matmul(&v.transpose())?)
}

/// Rank of a symmetric PSD matrix by eigenvalues, relative to the largest.
pub fn psd_rank(s: &SymMat) -> Result<usize> {
    let values = sym_eigenvalues(s)?;
    let max = values[0].max(0.0);
    Ok(values
        .iter()
        .filter(|&&l| max > 0.0 && l > RANK_TOL * max)
        .count())
}
