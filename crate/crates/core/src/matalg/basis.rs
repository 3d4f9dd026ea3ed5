use crate::error::{Error, Result};

use super::{factor::dot, Mat, SymMat, RANK_TOL};

/// Tolerance on `Z'Z = I`.
pub const ORTHO_TOL: f64 = 1e-10;

/// q×d matrix with orthonormal columns, each column in canonical sign:
/// its largest-magnitude entry (lowest row on ties) is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    columns: Mat,
}

impl OrthonormalBasis {
    /// Validates orthonormality and applies canonical signs.
    pub fn new(columns: Mat) -> Result<Self> {
        if columns.cols() > columns.rows() {
            return Err(Error::Dimension(format!(
                "basis of rank {} in ambient dimension {}",
                columns.cols(),
                columns.rows()
            )));
        }
        let deviation = orthonormality_error(&columns);
        if deviation > ORTHO_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(OrthonormalBasis {
            columns: canonical_signs(columns),
        })
    }

    /// Orthonormalizes the columns of `a` (two passes of modified
    /// Gram–Schmidt). Fails if `a` is numerically rank deficient.
    pub fn orthonormalize(a: &Mat) -> Result<Self> {
        let (q, d) = a.shape();
        if d > q {
            return Err(Error::Dimension(format!(
                "cannot orthonormalize {d} columns in dimension {q}"
            )));
        }
        let scale = (0..d).map(|j| norm(&a.column(j))).fold(0.0, f64::max);
        let mut done: Vec<Vec<f64>> = Vec::with_capacity(d);
        for j in 0..d {
            let mut v = a.column(j);
            for _ in 0..2 {
                for u in &done {
                    let c = dot(u, &v);
                    v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nv = norm(&v);
            if !(nv > RANK_TOL * scale) {
                return Err(Error::InvalidArgument(format!(
                    "column {j} is linearly dependent on earlier columns"
                )));
            }
            v.iter_mut().for_each(|x| *x /= nv);
            done.push(v);
        }
        let m = Mat::from_fn(q, d, |i, j| done[j][i]);
        OrthonormalBasis::new(m)
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.rows()
    }

    pub fn rank(&self) -> usize {
        self.columns.cols()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.columns
    }

    pub fn into_mat(self) -> Mat {
        self.columns
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.columns.column(j)
    }

    /// `Z Z'`.
    pub fn projector(&self) -> SymMat {
        SymMat::gram(&self.columns.transpose())
    }

    /// Basis of the columns `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.iter().any(|&k| k >= self.rank()) {
            return Err(Error::InvalidArgument(format!(
                "column index out of range for rank {}",
                self.rank()
            )));
        }
        Ok(OrthonormalBasis {
            columns: self.columns.select_columns(indices),
        })
    }

    /// Orthonormal basis of the orthogonal complement `C(Z)⊥`, or `None`
    /// when the basis already spans the ambient space.
    ///
    /// Coordinate vectors are projected off `C(Z)` and the one with the
    /// largest remaining norm is taken next, so the result is deterministic.
    pub fn complement(&self) -> Option<Self> {
        let q = self.ambient_dim();
        let d = self.rank();
        if d == q {
            return None;
        }
        let mut basis: Vec<Vec<f64>> = (0..d).map(|j| self.columns.column(j)).collect();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(q - d);
        let mut used = vec![false; q];
        for _ in 0..(q - d) {
            let mut best: Option<(usize, Vec<f64>, f64)> = None;
            for (k, taken) in used.iter().enumerate() {
                if *taken {
                    continue;
                }
                let mut v = vec![0.0; q];
                v[k] = 1.0;
                for _ in 0..2 {
                    for u in &basis {
                        let c = dot(u, &v);
                        v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
                    }
                }
                let nv = norm(&v);
                if best.as_ref().is_none_or(|(_, _, b)| nv > *b) {
                    best = Some((k, v, nv));
                }
            }
            let (k, mut v, nv) = best.expect("complement has remaining directions");
            used[k] = true;
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v.clone());
            out.push(v);
        }
        let m = Mat::from_fn(q, q - d, |i, j| out[j][i]);
        Some(OrthonormalBasis {
            columns: canonical_signs(m),
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Max-abs entry of `Z'Z - I`.
pub fn orthonormality_error(z: &Mat) -> f64 {
    let g = z.t_mul(z).expect("Z'Z conforms");
    let d = g.rows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn canonical_signs(mut m: Mat) -> Mat {
    for j in 0..m.cols() {
        let mut pivot = 0;
        let mut best = -1.0;
        for i in 0..m.rows() {
            let a = m[(i, j)].abs();
            if a > best {
                best = a;
                pivot = i;
            }
        }
        if m[(pivot, j)] < 0.0 {
            for i in 0..m.rows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
    m
}
