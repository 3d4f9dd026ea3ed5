//! Structured-covariance models `Σ = ZΩ²Z' + Z₀Ω₀²Z₀'` and selection of
//! which candidate eigenvectors span `C(Z)`.
//!
//! With Ω and Ω₀ profiled out the log-likelihood is
//!
//! ```text
//! model13: −(n/2) log|Z₀'Σ̂Z₀| − (n/2) log|Z'Σ̂_res Z|
//! model10: −(n/2) log|Z₀'Σ̂Z₀|
//! ```
//!
//! model10 is the special case `C(X) = C(J)⊥`, where the second term drops.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{Source, SubspaceEstimate};
use crate::error::{Error, Result};
use crate::estimators::{covariance_triple, CovarianceTriple, DataSet};
use crate::matalg::{logdet_pd, sym_eig, EigDecomp, Mat, OrthonormalBasis, SymMat};

/// Default limit on `choose(q, d)` for exhaustive selection.
pub const DEFAULT_SUBSET_CAP: u128 = 100_000;

/// Relative off-diagonal mass above which an Ω estimate is flagged.
const OMEGA_OFFDIAG_TOL: f64 = 1e-6;

/// Relative log-likelihood gap treated as a tie.
const LOGLIK_TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Model10,
    Model13,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Model10 => "model10",
            Variant::Model13 => "model13",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model10" | "structured10" => Ok(Variant::Model10),
            "model13" | "structured13" => Ok(Variant::Model13),
            other => Err(Error::Usage(format!(
                "unknown structured variant '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Exhaustive,
    Sequential,
}

impl Selection {
    pub fn name(self) -> &'static str {
        match self {
            Selection::Exhaustive => "exhaustive",
            Selection::Sequential => "sequential",
        }
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Selection::Exhaustive),
            "sequential" => Ok(Selection::Sequential),
            other => Err(Error::Usage(format!("unknown selection '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SelectionOptions {
    /// Maximum `choose(q, d)` evaluated by the exhaustive search.
    pub subset_cap: u128,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            subset_cap: DEFAULT_SUBSET_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StructuredFit {
    pub z_hat: SubspaceEstimate,
    /// `None` when `d = q`.
    pub z0_hat: Option<OrthonormalBasis>,
    pub omega2_hat: Vec<f64>,
    pub omega0_2_hat: Vec<f64>,
    /// Set when a projected block was not diagonal, so the Ω diagonals are
    /// only a summary of it.
    pub omega_nondiagonal: bool,
    pub log_lik: f64,
    pub variant: Variant,
    /// Log-likelihoods of the accepted moves, starting point first. A
    /// single entry for exhaustive search.
    pub path: Vec<f64>,
    /// Number of subsets whose likelihood was evaluated.
    pub evaluations: usize,
}

impl StructuredFit {
    /// 1-based selected candidate indices.
    pub fn selected_indices(&self) -> &[usize] {
        self.z_hat
            .selected_indices
            .as_deref()
            .expect("structured fits always record their subset")
    }
}

fn model13_precondition(triple: &CovarianceTriple) -> Result<()> {
    let dof = triple.residual_dof();
    let q = triple.q() as i64;
    if dof < q {
        return Err(Error::NotPositiveDefinite(format!(
            "model13 needs n - 1 - r(X) >= q so that sigma_res is positive definite \
             (got {dof} < {q}); supply a design X with fewer columns or more rows"
        )));
    }
    Ok(())
}

/// Profile log-likelihood at `C(Z)`, using a deterministic orthonormal
/// completion for `Z₀`. The value does not depend on which completion is used.
pub fn profile_loglik_structured(
    triple: &CovarianceTriple,
    z: &OrthonormalBasis,
    variant: Variant,
) -> Result<f64> {
    let z0 = z.complement();
    profile_loglik_with_complement(triple, z, z0.as_ref(), variant)
}

/// Profile log-likelihood with an explicit orthonormal completion `z0`
/// (`None` only when `Z` spans the whole space).
pub fn profile_loglik_with_complement(
    triple: &CovarianceTriple,
    z: &OrthonormalBasis,
    z0: Option<&OrthonormalBasis>,
    variant: Variant,
) -> Result<f64> {
    let q = triple.q();
    let d = z.rank();
    if z.ambient_dim() != q {
        return Err(Error::Dimension(format!(
            "basis ambient dimension {} but q = {q}",
            z.ambient_dim()
        )));
    }
    match z0 {
        Some(c) if c.ambient_dim() != q || c.rank() + d != q => {
            return Err(Error::Dimension("Z0 is not a completion of Z".into()))
        }
        None if d != q => return Err(Error::Dimension("missing Z0 for d < q".into())),
        _ => {}
    }
    if variant == Variant::Model13 {
        model13_precondition(triple)?;
    }
    let half_n = 0.5 * triple.n as f64;
    let complement_term = match z0 {
        Some(c) => logdet_pd(&triple.sigma_hat.congruence(c.as_mat())?)
            .map_err(|_| Error::SingularProfileBlock("Z0' sigma_hat Z0"))?,
        None => 0.0,
    };
    let signal_term = match variant {
        Variant::Model10 => 0.0,
        Variant::Model13 => logdet_pd(&triple.sigma_res.congruence(z.as_mat())?)
            .map_err(|_| Error::SingularProfileBlock("Z' sigma_res Z"))?,
    };
    Ok(-half_n * (complement_term + signal_term))
}

/// Eigendecomposition of the covariance estimate named by `source`.
pub fn candidate_eigenvectors(triple: &CovarianceTriple, source: Source) -> Result<EigDecomp> {
    let s = match source {
        Source::SigmaHat => &triple.sigma_hat,
        Source::SigmaFit => &triple.sigma_fit,
        Source::SigmaRes => &triple.sigma_res,
        other => {
            return Err(Error::InvalidArgument(format!(
                "subset selection needs sigma_hat, sigma_fit or sigma_res, not {other}"
            )))
        }
    };
    sym_eig(s)
}

struct Candidates<'a> {
    triple: &'a CovarianceTriple,
    eig: EigDecomp,
    variant: Variant,
    source: Source,
}

impl Candidates<'_> {
    fn q(&self) -> usize {
        self.eig.dim()
    }

    /// `subset` is sorted, 0-based.
    fn split(&self, subset: &[usize]) -> (OrthonormalBasis, Option<OrthonormalBasis>) {
        let rest: Vec<usize> = (0..self.q()).filter(|k| !subset.contains(k)).collect();
        let z = self.eig.vectors.select(subset).expect("indices in range");
        let z0 = (!rest.is_empty()).then(|| self.eig.vectors.select(&rest).expect("in range"));
        (z, z0)
    }

    fn loglik(&self, subset: &[usize]) -> Result<f64> {
        let (z, z0) = self.split(subset);
        profile_loglik_with_complement(self.triple, &z, z0.as_ref(), self.variant)
    }

    fn finish(
        &self,
        subset: Vec<usize>,
        log_lik: f64,
        path: Vec<f64>,
        evaluations: usize,
    ) -> Result<StructuredFit> {
        let (z, z0) = self.split(&subset);
        let signal_block = match self.variant {
            Variant::Model13 => self.triple.sigma_res.congruence(z.as_mat())?,
            Variant::Model10 => self.triple.sigma_hat.congruence(z.as_mat())?,
        };
        let complement_block = match &z0 {
            Some(c) => Some(self.triple.sigma_hat.congruence(c.as_mat())?),
            None => None,
        };
        let omega_nondiagonal =
            is_nondiagonal(&signal_block) || complement_block.as_ref().is_some_and(is_nondiagonal);
        Ok(StructuredFit {
            z_hat: SubspaceEstimate {
                basis: z,
                source: self.source,
                selected_indices: Some(subset.iter().map(|k| k + 1).collect()),
                log_lik: Some(log_lik),
                warnings: Vec::new(),
            },
            z0_hat: z0,
            omega2_hat: signal_block.diagonal(),
            omega0_2_hat: complement_block.map(|b| b.diagonal()).unwrap_or_default(),
            omega_nondiagonal,
            log_lik,
            variant: self.variant,
            path,
            evaluations,
        })
    }
}

fn is_nondiagonal(s: &SymMat) -> bool {
    let total = s.frobenius_norm();
    let diag: f64 = s.diagonal().iter().map(|v| v * v).sum::<f64>();
    let off = (total * total - diag).max(0.0).sqrt();
    off > OMEGA_OFFDIAG_TOL * total
}

fn prepare<'a>(
    triple: &'a CovarianceTriple,
    d: usize,
    variant: Variant,
    source: Source,
) -> Result<Candidates<'a>> {
    let q = triple.q();
    if d == 0 || d > q {
        return Err(Error::InvalidArgument(format!(
            "reduction dimension must satisfy 1 <= d <= q, got d = {d}, q = {q}"
        )));
    }
    if variant == Variant::Model13 {
        model13_precondition(triple)?;
    }
    Ok(Candidates {
        triple,
        eig: candidate_eigenvectors(triple, source)?,
        variant,
        source,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

/// Lexicographic d-subsets of `0..q`.
fn combinations(q: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..d).rev().find(|&i| idx[i] != i + q - d) else {
            return out;
        };
        idx[i] += 1;
        for j in (i + 1)..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn beats(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + LOGLIK_TIE_TOL * incumbent.abs().max(1.0)
}

/// Evaluates every d-subset of the candidate eigenvectors and keeps the most
/// likely. Ties go to the lexicographically smallest index set.
pub fn fit_structured_exhaustive(
    triple: &CovarianceTriple,
    d: usize,
    variant: Variant,
    source: Source,
    options: &SelectionOptions,
) -> Result<StructuredFit> {
    let cands = prepare(triple, d, variant, source)?;
    let q = cands.q();
    let subsets = binomial(q, d);
    if subsets > options.subset_cap {
        return Err(Error::SubsetCapExceeded {
            subsets,
            cap: options.subset_cap,
        });
    }
    let combos = combinations(q, d);
    let values: Vec<Result<f64>> = combos.par_iter().map(|c| cands.loglik(c)).collect();

    // ordered scan: the result does not depend on evaluation order
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.into_iter().enumerate() {
        let v = v?;
        if best.is_none_or(|(_, b)| beats(v, b)) {
            best = Some((k, v));
        }
    }
    let (k, ll) = best.expect("at least one subset");
    let evaluations = combos.len();
    let subset = combos.into_iter().nth(k).expect("index from enumeration");
    cands.finish(subset, ll, vec![ll], evaluations)
}

/// Best-improvement single-swap hill climbing from the `d` leading
/// candidates. Stops at a local maximum; every accepted move strictly
/// increases the log-likelihood.
pub fn fit_structured_sequential(
    triple: &CovarianceTriple,
    d: usize,
    variant: Variant,
    source: Source,
) -> Result<StructuredFit> {
    let cands = prepare(triple, d, variant, source)?;
    let q = cands.q();
    let mut current: Vec<usize> = (0..d).collect();
    let mut current_ll = cands.loglik(&current)?;
    let mut path = vec![current_ll];
    let mut evaluations = 1;

    loop {
        let outside: Vec<usize> = (0..q).filter(|k| !current.contains(k)).collect();
        if outside.is_empty() {
            break;
        }
        let mut neighbours: Vec<Vec<usize>> = Vec::with_capacity(d * outside.len());
        for pos in 0..d {
            for &k in &outside {
                let mut next = current.clone();
                next[pos] = k;
                next.sort_unstable();
                neighbours.push(next);
            }
        }
        neighbours.sort();
        let values: Vec<Result<f64>> = neighbours.par_iter().map(|c| cands.loglik(c)).collect();
        evaluations += neighbours.len();

        let mut best: Option<(usize, f64)> = None;
        for (k, v) in values.into_iter().enumerate() {
            let v = v?;
            if best.is_none_or(|(_, b)| beats(v, b)) {
                best = Some((k, v));
            }
        }
        match best {
            Some((k, v)) if beats(v, current_ll) => {
                current = neighbours.swap_remove(k);
                current_ll = v;
                path.push(v);
            }
            _ => break,
        }
    }
    cands.finish(current, current_ll, path, evaluations)
}

/// Observations for a structured fit: model10 needs only `Y`.
pub enum FitInput<'a> {
    Response(&'a Mat),
    Data(&'a DataSet),
}

/// Dispatches on selection strategy, building the covariance triple from
/// whichever observations are supplied.
pub fn fit_structured(
    input: FitInput<'_>,
    d: usize,
    variant: Variant,
    source: Source,
    selection: Selection,
    options: &SelectionOptions,
) -> Result<StructuredFit> {
    let triple = match input {
        FitInput::Data(data) => covariance_triple(data)?,
        FitInput::Response(y) => {
            if variant == Variant::Model13 {
                return Err(Error::Usage("model13 requires a design matrix X".into()));
            }
            CovarianceTriple::from_response(y)?
        }
    };
    match selection {
        Selection::Exhaustive => fit_structured_exhaustive(&triple, d, variant, source, options),
        Selection::Sequential => fit_structured_sequential(&triple, d, variant, source),
    }
}
