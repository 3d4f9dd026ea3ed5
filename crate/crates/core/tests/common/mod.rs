//! Reference computations for integration tests. Everything here is plain
//! nested-loop linear algebra on `Vec<Vec<f64>>`, independent of the
//! library's factorizations.

#![allow(dead_code)]

use pfcreduce::matalg::{Mat, OrthonormalBasis, SymMat};
use pfcreduce::simulate::NormalStream;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> NormalStream {
    NormalStream::new(seed, 7)
}

/// Uniform integer in `lo..=hi`.
pub fn int_in(rng: &mut NormalStream, lo: usize, hi: usize) -> usize {
    lo + ((rng.uniform() * (hi - lo + 1) as f64) as usize).min(hi - lo)
}

pub fn uniform_in(rng: &mut NormalStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

pub fn gaussian(rng: &mut NormalStream, rows: usize, cols: usize) -> Dense {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.normal()).collect())
        .collect()
}

pub fn dense(m: &Mat) -> Dense {
    m.to_rows()
}

pub fn to_mat(a: &Dense) -> Mat {
    Mat::from_rows(a).unwrap()
}

pub fn to_sym(a: &Dense) -> SymMat {
    SymMat::symmetrize(&to_mat(a)).unwrap()
}

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Dense {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn transpose(a: &Dense) -> Dense {
    let (r, c) = (a.len(), a[0].len());
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    assert_eq!(a[0].len(), k);
    let mut out = zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            out[i][j] = (0..k).map(|t| a[i][t] * b[t][j]).sum();
        }
    }
    out
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect())
        .collect()
}

pub fn sub(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u - v).collect())
        .collect()
}

pub fn scale(a: &Dense, c: f64) -> Dense {
    a.iter()
        .map(|r| r.iter().map(|v| v * c).collect())
        .collect()
}

pub fn fro(a: &Dense) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

pub fn diag(v: &[f64]) -> Dense {
    let mut m = zeros(v.len(), v.len());
    for (i, x) in v.iter().enumerate() {
        m[i][i] = *x;
    }
    m
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .zip(eye(n))
        .map(|(r, e)| r.iter().copied().chain(e).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular matrix in oracle inverse");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (v, pv) in m[i].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Columns orthonormalized by classical Gram-Schmidt applied twice.
pub fn gram_schmidt(a: &Dense) -> Dense {
    let cols = transpose(a);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for c in cols {
        let mut v = c;
        for _ in 0..2 {
            for u in &out {
                let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= dot * ui;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm > 1e-10, "dependent columns in oracle Gram-Schmidt");
        out.push(v.into_iter().map(|x| x / norm).collect());
    }
    transpose(&out)
}

pub fn random_orthonormal(rng: &mut NormalStream, q: usize, d: usize) -> Dense {
    gram_schmidt(&gaussian(rng, q, d))
}

pub fn basis(a: &Dense) -> OrthonormalBasis {
    OrthonormalBasis::new(to_mat(a)).unwrap()
}

/// `I − J/n`.
pub fn centering(n: usize) -> Dense {
    let mut c = eye(n);
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v -= 1.0 / n as f64;
        }
    }
    c
}

/// `A (A'A)⁻¹ A'` for full-column-rank `A`.
pub fn projector(a: &Dense) -> Dense {
    let at = transpose(a);
    mul(&mul(a, &inverse(&mul(&at, a))), &at)
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, ca, rb, cb) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Column-stacking as an n·m vector.
pub fn vec_of(a: &Dense) -> Vec<f64> {
    transpose(a).into_iter().flatten().collect()
}

/// Helmert contrasts: an n×(n−1) matrix whose columns span `C(J_n)⊥`.
pub fn helmert(n: usize) -> Dense {
    let mut h = zeros(n, n - 1);
    for j in 0..n - 1 {
        for (i, row) in h.iter_mut().enumerate() {
            row[j] = if i <= j {
                1.0
            } else if i == j + 1 {
                -((j + 1) as f64)
            } else {
                0.0
            };
        }
    }
    h
}

/// `‖P_A − P_B‖_F / √(2d)` from explicit projectors.
pub fn distance(a: &Dense, b: &Dense) -> f64 {
    let d = a[0].len() as f64;
    let pa = mul(a, &transpose(a));
    let pb = mul(b, &transpose(b));
    fro(&sub(&pa, &pb)) / (2.0 * d).sqrt()
}

/// Noise-free response `Jμ' + XΓZ'` for a centered X.
pub fn noiseless_response(x: &Dense, gamma: &Dense, z: &Dense, mu: &[f64]) -> Dense {
    let signal = mul(&mul(x, gamma), &transpose(z));
    signal
        .into_iter()
        .map(|r| r.iter().zip(mu).map(|(s, m)| s + m).collect())
        .collect()
}

pub fn center_columns(a: &Dense) -> Dense {
    mul(&centering(a.len()), a)
}

pub fn write_csv(path: &std::path::Path, a: &Dense) {
    let text: String = a
        .iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            cells.join(",") + "\n"
        })
        .collect();
    std::fs::write(path, text).unwrap();
}
