//! Rank-revealing and triangular factorizations.

use crate::error::{Error, Result};

use super::{Mat, RANK_TOL};

const SVD_MAX_SWEEPS: usize = 100;

/// Thin singular value decomposition `A = U diag(s) V'`, singular values
/// descending. Only the numerically nonzero part is kept: `u` is m×r,
/// `v` is n×r, `s` has r entries, where r is the rank under [`RANK_TOL`].
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Option<Mat>,
    pub s: Vec<f64>,
    pub v: Option<Mat>,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn thin_svd(a: &Mat) -> Result<ThinSvd> {
    if a.rows() < a.cols() {
        let t = thin_svd(&a.transpose())?;
        return Ok(ThinSvd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let (m, n) = a.shape();
    // column-major working copies
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut converged = n == 1;
    for _ in 0..SVD_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..n - 1 {
            for j in (i + 1)..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, i, j, c, s);
                rotate_pair(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps: SVD_MAX_SWEEPS,
        });
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let smax = norms[order[0]];
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&k| smax > 0.0 && norms[k] > RANK_TOL * smax)
        .collect();
    if kept.is_empty() {
        return Ok(ThinSvd {
            u: None,
            s: Vec::new(),
            v: None,
        });
    }
    let r = kept.len();
    let s: Vec<f64> = kept.iter().map(|&k| norms[k]).collect();
    let u = Mat::from_fn(m, r, |i, c| cols[kept[c]][i] / s[c]);
    let vm = Mat::from_fn(n, r, |i, c| v[kept[c]][i]);
    Ok(ThinSvd {
        u: Some(u),
        s,
        v: Some(vm),
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of `C(A)`, or `None` when `A` has rank 0.
pub fn range_basis(a: &Mat) -> Result<Option<Mat>> {
    Ok(thin_svd(a)?.u)
}

/// Numerical rank under [`RANK_TOL`].
pub fn rank(a: &Mat) -> Result<usize> {
    Ok(thin_svd(a)?.rank())
}

/// Moore–Penrose pseudoinverse.
pub fn pinv(a: &Mat) -> Result<Mat> {
    let svd = thin_svd(a)?;
    match (svd.u, svd.v) {
        (Some(u), Some(v)) => {
            let scaled = Mat::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] / svd.s[j]);
            Ok(scaled.mul_unchecked(&u.transpose()))
        }
        _ => Ok(Mat::zeros(a.cols(), a.rows())),
    }
}

/// Lower Cholesky factor of a symmetric matrix; fails on a nonpositive pivot.
pub fn cholesky(s: &Mat) -> Result<Mat> {
    if !s.is_square() {
        return Err(Error::Dimension("cholesky needs a square matrix".into()));
    }
    let n = s.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "cholesky pivot {j} is {d:e}"
            )));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    Ok(l)
}

/// Solves `S X = B` given the lower Cholesky factor `L` of `S`.
pub fn cholesky_solve(l: &Mat, b: &Mat) -> Result<Mat> {
    let n = l.rows();
    if b.rows() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, expected {n}",
            b.rows()
        )));
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        // L y = b
        for i in 0..n {
            let mut v = x[(i, c)];
            for k in 0..i {
                v -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
        // L' x = y
        for i in (0..n).rev() {
            let mut v = x[(i, c)];
            for k in (i + 1)..n {
                v -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    Ok(x)
}
