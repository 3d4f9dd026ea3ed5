//! Fitting the reduction models: principal components, isotropic
//! principal fitted components, the structured-covariance models, and the
//! two corrections for a general error covariance.

mod structured;

pub use structured::{
    candidate_eigenvectors, fit_structured, fit_structured_exhaustive, fit_structured_sequential,
    profile_loglik_structured, profile_loglik_with_complement, FitInput, Selection,
    SelectionOptions, StructuredFit, Variant, DEFAULT_SUBSET_CAP,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::{covariance_triple, CovarianceTriple, DataSet};
use crate::matalg::{
    cholesky, cholesky_solve, generalized_sym_eig, pinv, require_pd, sym_eig, EigDecomp, Mat,
    OrthonormalBasis, SymMat, EIG_TIE_TOL,
};

/// Which matrix an estimated basis came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    SigmaHat,
    SigmaFit,
    SigmaRes,
    Moment,
    Transformed,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::SigmaHat => "sigma_hat",
            Source::SigmaFit => "sigma_fit",
            Source::SigmaRes => "sigma_res",
            Source::Moment => "moment",
            Source::Transformed => "transformed",
        }
    }

    /// Sources usable as candidate eigenvectors for subset selection.
    pub const CANDIDATES: [Source; 3] = [Source::SigmaHat, Source::SigmaFit, Source::SigmaRes];
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma_hat" => Ok(Source::SigmaHat),
            "sigma_fit" => Ok(Source::SigmaFit),
            "sigma_res" => Ok(Source::SigmaRes),
            "moment" => Ok(Source::Moment),
            "transformed" => Ok(Source::Transformed),
            other => Err(Error::Usage(format!("unknown source '{other}'"))),
        }
    }
}

/// Estimated basis of `C(Z)`.
#[derive(Clone, Debug)]
pub struct SubspaceEstimate {
    pub basis: OrthonormalBasis,
    pub source: Source,
    /// 1-based indices into the candidate eigenvectors, when the basis is
    /// a subset of them.
    pub selected_indices: Option<Vec<usize>>,
    pub log_lik: Option<f64>,
    pub warnings: Vec<String>,
}

impl SubspaceEstimate {
    pub fn dim(&self) -> usize {
        self.basis.rank()
    }
}

/// Least squares / maximum likelihood fit of the isotropic growth-curve model.
#[derive(Clone, Debug)]
pub struct IsotonicFit {
    pub mu_hat: Vec<f64>,
    pub z_hat: SubspaceEstimate,
    /// p×d.
    pub gamma_hat: Mat,
    pub sse: f64,
    pub sigma2_hat: f64,
    pub log_lik: f64,
}

fn check_rank(d: usize, q: usize) -> Result<()> {
    if d == 0 || d >= q {
        return Err(Error::InvalidArgument(format!(
            "reduction dimension must satisfy 1 <= d < q, got d = {d}, q = {q}"
        )));
    }
    Ok(())
}

fn leading_estimate(eig: &EigDecomp, d: usize, source: Source) -> SubspaceEstimate {
    let mut warnings = Vec::new();
    let (a, b) = (eig.values[d - 1], eig.values[d]);
    if (a - b).abs() <= EIG_TIE_TOL * a.abs().max(b.abs()).max(1.0) {
        warnings.push(format!(
            "eigenvalues {d} and {} of {source} are tied ({a:e}); the subspace is not identifiable",
            d + 1
        ));
    }
    SubspaceEstimate {
        basis: eig.leading(d),
        source,
        selected_indices: Some((1..=d).collect()),
        log_lik: None,
        warnings,
    }
}

/// Principal-component estimate: the first `d` eigenvectors of `Σ̂`
/// computed from `Y` alone.
pub fn fit_pc(y: &Mat, d: usize) -> Result<SubspaceEstimate> {
    check_rank(d, y.cols())?;
    let triple = CovarianceTriple::from_response(y)?;
    let eig = sym_eig(&triple.sigma_hat)?;
    Ok(leading_estimate(&eig, d, Source::SigmaHat))
}

/// `tr(nΣ̂) − tr(Z' nΣ̂_fit Z)`.
pub fn sse_isotonic(data: &DataSet, z: &OrthonormalBasis) -> Result<f64> {
    sse_from_triple(&covariance_triple(data)?, z)
}

/// [`sse_isotonic`] from a precomputed triple.
pub fn sse_from_triple(triple: &CovarianceTriple, z: &OrthonormalBasis) -> Result<f64> {
    if z.ambient_dim() != triple.q() {
        return Err(Error::Dimension(format!(
            "basis has ambient dimension {}, q = {}",
            z.ambient_dim(),
            triple.q()
        )));
    }
    let nf = triple.n as f64;
    let explained = triple.sigma_fit.congruence(z.as_mat())?.trace();
    Ok((nf * (triple.sigma_hat.trace() - explained)).max(0.0))
}

/// Isotropic principal fitted components: `Ẑ` from the top `d`
/// eigenvectors of `Σ̂_fit`, `μ̂ = ȳ`, `Γ̂ = (X'X)⁻X'YẐ`, `σ̂² = SSE/(nq)`.
///
/// The log-likelihood omits the additive constant. It is `+∞` when the
/// fit is exact.
pub fn fit_pfc_isotonic(data: &DataSet, d: usize) -> Result<IsotonicFit> {
    let q = data.q();
    check_rank(d, q)?;
    let triple = covariance_triple(data)?;
    let fit_norm = triple.sigma_fit.frobenius_norm();
    if fit_norm == 0.0 || fit_norm <= 1e-14 * triple.sigma_hat.frobenius_norm() {
        return Err(Error::NoFittedVariation);
    }
    let eig = sym_eig(&triple.sigma_fit)?;
    let z_hat = leading_estimate(&eig, d, Source::SigmaFit);

    let gamma_hat = pinv(data.x())?
        .matmul(data.y())?
        .matmul(z_hat.basis.as_mat())?;
    let sse = sse_from_triple(&triple, &z_hat.basis)?;
    let nq = (data.n() * q) as f64;
    let sigma2_hat = sse / nq;
    let log_lik = if sigma2_hat > 0.0 {
        -0.5 * nq * sigma2_hat.ln() - sse / (2.0 * sigma2_hat)
    } else {
        f64::INFINITY
    };
    Ok(IsotonicFit {
        mu_hat: data.y().column_means(),
        z_hat: SubspaceEstimate {
            log_lik: Some(log_lik),
            ..z_hat
        },
        gamma_hat,
        sse,
        sigma2_hat,
        log_lik,
    })
}

/// Maps a basis of `C(Z)` to an orthonormal basis of `C(Σ⁻¹Z)`.
pub fn transform_general_sigma(
    est: &SubspaceEstimate,
    sigma_est: &SymMat,
) -> Result<SubspaceEstimate> {
    if sigma_est.dim() != est.basis.ambient_dim() {
        return Err(Error::Dimension(format!(
            "sigma is {0}x{0}, basis ambient dimension {1}",
            sigma_est.dim(),
            est.basis.ambient_dim()
        )));
    }
    require_pd(sigma_est)?;
    let l = cholesky(sigma_est.as_mat())?;
    let mapped = cholesky_solve(&l, est.basis.as_mat())?;
    Ok(SubspaceEstimate {
        basis: OrthonormalBasis::orthonormalize(&mapped)?,
        source: Source::Transformed,
        selected_indices: None,
        log_lik: None,
        warnings: est.warnings.clone(),
    })
}

/// Top `d` eigenvectors of `Σ̂_res⁻¹ Σ̂_fit`, i.e. of the generalized problem
/// `Σ̂_fit v = λ Σ̂_res v`, orthonormalized.
pub fn fit_res_inv_fit(data: &DataSet, d: usize) -> Result<SubspaceEstimate> {
    let q = data.q();
    check_rank(d, q)?;
    let triple = covariance_triple(data)?;
    let dof = triple.residual_dof();
    if dof < q as i64 {
        return Err(Error::NotPositiveDefinite(format!(
            "sigma_res needs n - 1 - r(X) >= q, got {dof} < {q}"
        )));
    }
    let (values, vectors) = generalized_sym_eig(&triple.sigma_fit, &triple.sigma_res)?;
    let idx: Vec<usize> = (0..d).collect();
    let mut warnings = Vec::new();
    let (a, b) = (values[d - 1], values[d]);
    if (a - b).abs() <= EIG_TIE_TOL * a.abs().max(b.abs()).max(1.0) {
        warnings.push(format!(
            "generalized eigenvalues {d} and {} are tied; the subspace is not identifiable",
            d + 1
        ));
    }
    Ok(SubspaceEstimate {
        basis: OrthonormalBasis::orthonormalize(&vectors.select_columns(&idx))?,
        source: Source::Transformed,
        selected_indices: None,
        log_lik: None,
        warnings,
    })
}

/// Top `d` eigenvectors of the moment estimator
/// `(n/r(X))Σ̂_fit − (n/(n−1))Σ̂`.
pub fn fit_moment(data: &DataSet, d: usize) -> Result<SubspaceEstimate> {
    check_rank(d, data.q())?;
    let triple = covariance_triple(data)?;
    let m = crate::estimators::moment_estimator(&triple)?;
    let eig = sym_eig(&m)?;
    Ok(leading_estimate(&eig, d, Source::Moment))
}
