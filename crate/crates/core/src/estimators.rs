//! Covariance estimators built from a centered design, their closed-form
//! expectations under the growth-curve model, and the moment estimator.

use crate::error::{Error, Result};
use crate::matalg::{
    orthonormality_error, range_basis, sym_eig, Mat, OrthonormalBasis, SymMat, ORTHO_TOL,
};

/// Column means larger than this (in absolute value) mean X is not centered.
pub const CENTERING_TOL: f64 = 1e-10;

/// Tolerance for negative eigenvalues of estimators that are PSD in exact
/// arithmetic, relative to the largest eigenvalue.
pub const PSD_TOL: f64 = 1e-9;

/// Responses `Y` (n×q) with a column-centered design `X` (n×p).
#[derive(Clone, Debug)]
pub struct DataSet {
    y: Mat,
    x: Mat,
    centered_x: bool,
}

impl DataSet {
    /// Builds a data set, centering the columns of `X` if any column mean
    /// exceeds [`CENTERING_TOL`]. Whether that happened is reported by
    /// [`DataSet::centered_x`].
    pub fn new(y: Mat, x: Mat) -> Result<Self> {
        DataSet::with_centering(y, x, true)
    }

    /// As [`DataSet::new`]; with `center = false` an uncentered `X` is
    /// rejected instead.
    pub fn with_centering(y: Mat, x: Mat, center: bool) -> Result<Self> {
        let (n, q) = y.shape();
        let p = x.cols();
        if x.rows() != n {
            return Err(Error::Dimension(format!(
                "Y has {n} rows but X has {}",
                x.rows()
            )));
        }
        if q < 2 {
            return Err(Error::Dimension(format!("need q >= 2 responses, got {q}")));
        }
        // a centered design has rank at most n - 1
        if n < p + 1 {
            return Err(Error::Dimension(format!(
                "need n >= p + 1, got n = {n}, p = {p}"
            )));
        }
        let off_center = x.column_means().iter().any(|m| m.abs() > CENTERING_TOL);
        let (x, centered_x) = match (off_center, center) {
            (false, _) => (x, false),
            (true, true) => (x.center_columns(), true),
            (true, false) => {
                return Err(Error::InvalidArgument(
                    "X columns are not mean-centered and centering is disabled".into(),
                ))
            }
        };
        Ok(DataSet { y, x, centered_x })
    }

    pub fn y(&self) -> &Mat {
        &self.y
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.y.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn q(&self) -> usize {
        self.y.cols()
    }

    /// True when the constructor had to center `X`.
    pub fn centered_x(&self) -> bool {
        self.centered_x
    }
}

/// `Σ̂`, `Σ̂_fit`, `Σ̂_res` (all divided by n) with `r(X)` and `n`.
#[derive(Clone, Debug)]
pub struct CovarianceTriple {
    pub sigma_hat: SymMat,
    pub sigma_fit: SymMat,
    pub sigma_res: SymMat,
    pub r_x: usize,
    pub n: usize,
}

impl CovarianceTriple {
    /// Assembles a triple from given matrices, checking shapes and that each
    /// is PSD within [`PSD_TOL`].
    pub fn from_parts(
        sigma_hat: SymMat,
        sigma_fit: SymMat,
        sigma_res: SymMat,
        r_x: usize,
        n: usize,
    ) -> Result<Self> {
        let q = sigma_hat.dim();
        if sigma_fit.dim() != q || sigma_res.dim() != q {
            return Err(Error::Dimension("triple members differ in size".into()));
        }
        for (name, s) in [
            ("sigma_hat", &sigma_hat),
            ("sigma_fit", &sigma_fit),
            ("sigma_res", &sigma_res),
        ] {
            check_psd(s).map_err(|_| {
                Error::NotPositiveDefinite(format!("{name} is not positive semidefinite"))
            })?;
        }
        Ok(CovarianceTriple {
            sigma_hat,
            sigma_fit,
            sigma_res,
            r_x,
            n,
        })
    }

    /// Triple for the largest possible design, `C(X) = C(J_n)⊥`: the fitted
    /// estimator equals `Σ̂` and the residual estimator vanishes. Needs only `Y`.
    pub fn from_response(y: &Mat) -> Result<Self> {
        let n = y.rows();
        if n < 2 {
            return Err(Error::Dimension(format!("need n >= 2 rows, got {n}")));
        }
        let sigma_hat = SymMat::gram(&y.center_columns()).scale(1.0 / n as f64);
        let q = sigma_hat.dim();
        Ok(CovarianceTriple {
            sigma_fit: sigma_hat.clone(),
            sigma_hat,
            sigma_res: SymMat::zeros(q),
            r_x: n - 1,
            n,
        })
    }

    pub fn q(&self) -> usize {
        self.sigma_hat.dim()
    }

    /// `n - 1 - r(X)`.
    pub fn residual_dof(&self) -> i64 {
        self.n as i64 - 1 - self.r_x as i64
    }
}

/// `Σ̂ = Y'(I − J/n)Y / n`, `Σ̂_fit = Y'P_X Y / n`, `Σ̂_res = Y'(I − J/n − P_X)Y / n`.
pub fn covariance_triple(data: &DataSet) -> Result<CovarianceTriple> {
    let n = data.n();
    let inv_n = 1.0 / n as f64;
    let yc = data.y().center_columns();
    let u = range_basis(data.x())?.ok_or(Error::DegenerateDesign)?;
    let r_x = u.cols();

    // J'X = 0 gives P_X J = 0, so P_X Y = P_X Yc.
    let fitted_coords = u.t_mul(&yc)?;
    let residual = yc.sub(&u.matmul(&fitted_coords)?)?;

    Ok(CovarianceTriple {
        sigma_hat: SymMat::gram(&yc).scale(inv_n),
        sigma_fit: SymMat::gram(&fitted_coords).scale(inv_n),
        sigma_res: SymMat::gram(&residual).scale(inv_n),
        r_x,
        n,
    })
}

/// Errors if `s` has an eigenvalue below `-PSD_TOL · max eigenvalue`;
/// otherwise returns `s` with small negative eigenvalues clamped to zero.
pub fn clamp_psd(s: &SymMat) -> Result<SymMat> {
    let eig = sym_eig(s)?;
    let max = eig.values[0].max(0.0);
    let min = *eig.values.last().expect("nonempty");
    if min >= 0.0 {
        return Ok(s.clone());
    }
    if min < -PSD_TOL * max || max == 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "matrix has eigenvalue {min:e} (largest {max:e})"
        )));
    }
    let v = eig.vectors.as_mat();
    let clamped: Vec<f64> = eig.values.iter().map(|l| l.max(0.0)).collect();
    let vl = Mat::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] * clamped[j]);
    SymMat::symmetrize(&vl.matmul(&v.transpose())?)
}

fn check_psd(s: &SymMat) -> Result<()> {
    let values = crate::matalg::sym_eigenvalues(s)?;
    let max = values[0].max(0.0);
    let min = *values.last().expect("nonempty");
    if min < -PSD_TOL * max.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveDefinite(format!("eigenvalue {min:e}")));
    }
    Ok(())
}

/// True parameters of the growth-curve model with structured error
/// covariance `Σ = Z diag(Ω²) Z' + Z₀ diag(Ω₀²) Z₀'`.
#[derive(Clone, Debug)]
pub struct PopulationModel {
    pub mu: Vec<f64>,
    pub z: OrthonormalBasis,
    pub z0: OrthonormalBasis,
    /// p×d.
    pub gamma: Mat,
    pub omega2: Vec<f64>,
    pub omega0_2: Vec<f64>,
    /// Marginal covariance of a row of X (p×p).
    pub v_x: SymMat,
}

impl PopulationModel {
    pub fn new(
        mu: Vec<f64>,
        z: OrthonormalBasis,
        z0: OrthonormalBasis,
        gamma: Mat,
        omega2: Vec<f64>,
        omega0_2: Vec<f64>,
        v_x: SymMat,
    ) -> Result<Self> {
        let q = z.ambient_dim();
        let d = z.rank();
        let p = v_x.dim();
        if z0.ambient_dim() != q || z0.rank() + d != q {
            return Err(Error::Dimension(format!(
                "Z0 must be {q}x{}, got {}x{}",
                q - d,
                z0.ambient_dim(),
                z0.rank()
            )));
        }
        let frame = z.as_mat().hstack(z0.as_mat())?;
        let deviation = orthonormality_error(&frame);
        if deviation > ORTHO_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        if mu.len() != q {
            return Err(Error::Dimension(format!(
                "mu has {} entries, q = {q}",
                mu.len()
            )));
        }
        if gamma.shape() != (p, d) {
            return Err(Error::Dimension(format!(
                "Gamma must be {p}x{d}, got {}x{}",
                gamma.rows(),
                gamma.cols()
            )));
        }
        if omega2.len() != d || omega0_2.len() != q - d {
            return Err(Error::Dimension("omega lengths must be d and q - d".into()));
        }
        if omega2.iter().chain(&omega0_2).any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument(
                "omega entries must be positive".into(),
            ));
        }
        crate::matalg::require_pd(&v_x)?;
        Ok(PopulationModel {
            mu,
            z,
            z0,
            gamma,
            omega2,
            omega0_2,
            v_x,
        })
    }

    pub fn q(&self) -> usize {
        self.z.ambient_dim()
    }

    pub fn d(&self) -> usize {
        self.z.rank()
    }

    pub fn p(&self) -> usize {
        self.v_x.dim()
    }

    /// Error covariance `Z Ω² Z' + Z₀ Ω₀² Z₀'`.
    pub fn sigma(&self) -> SymMat {
        let a = SymMat::diag(&self.omega2).congruence(&self.z.as_mat().transpose());
        let b = SymMat::diag(&self.omega0_2).congruence(&self.z0.as_mat().transpose());
        a.and_then(|a| b.and_then(|b| a.add(&b)))
            .expect("population shapes validated")
    }

    /// `Z Γ' V_x Γ Z'`.
    pub fn signal(&self) -> SymMat {
        let zg = self
            .z
            .as_mat()
            .matmul(&self.gamma.transpose())
            .expect("validated");
        self.v_x.congruence(&zg.transpose()).expect("validated")
    }
}

/// `E(Σ̂)`, `E(Σ̂_fit)`, `E(Σ̂_res)` for sample size `n` and design rank `r_x`.
pub fn expected_covariances(
    pop: &PopulationModel,
    n: usize,
    r_x: usize,
) -> Result<(SymMat, SymMat, SymMat)> {
    if n <= r_x + 1 {
        return Err(Error::InvalidArgument(format!(
            "expectations need n > r(X) + 1, got n = {n}, r(X) = {r_x}"
        )));
    }
    let nf = n as f64;
    let rf = r_x as f64;
    let sigma = pop.sigma();
    let signal = pop.signal().scale((nf - 1.0) / nf);
    let e_hat = sigma.scale((nf - 1.0) / nf).add(&signal)?;
    let e_fit = sigma.scale(rf / nf).add(&signal)?;
    let e_res = sigma.scale((nf - 1.0 - rf) / nf);
    Ok((e_hat, e_fit, e_res))
}

/// `(n / r(X)) Σ̂_fit − (n / (n − 1)) Σ̂`. May be indefinite.
pub fn moment_estimator(triple: &CovarianceTriple) -> Result<SymMat> {
    if triple.r_x == 0 || triple.n < 2 {
        return Err(Error::InvalidArgument(format!(
            "moment estimator needs r(X) >= 1 and n >= 2, got r(X) = {}, n = {}",
            triple.r_x, triple.n
        )));
    }
    let nf = triple.n as f64;
    triple
        .sigma_fit
        .scale(nf / triple.r_x as f64)
        .sub(&triple.sigma_hat.scale(nf / (nf - 1.0)))
}

/// `(n / (n − 1 − r(X))) Σ̂_res`, unbiased for `Σ`.
pub fn sigma_from_res(triple: &CovarianceTriple) -> Result<SymMat> {
    let dof = triple.residual_dof();
    if dof < 1 {
        return Err(Error::NoResidualDof(dof));
    }
    let res = clamp_psd(&triple.sigma_res)?;
    Ok(res.scale(triple.n as f64 / dof as f64))
}

/// Conditional expectation `E(Y' P_A Y | X) = r(A) Σ + Z Γ' X' P_A X Γ Z'`
/// for a projection `P_A` with `J'A = 0`.
pub fn expected_quadratic_form(pop: &PopulationModel, x: &Mat, p_a: &SymMat) -> Result<SymMat> {
    if p_a.dim() != x.rows() {
        return Err(Error::Dimension(format!(
            "P_A is {0}x{0} but X has {1} rows",
            p_a.dim(),
            x.rows()
        )));
    }
    if x.cols() != pop.p() {
        return Err(Error::Dimension(format!(
            "X has {} columns, population has p = {}",
            x.cols(),
            pop.p()
        )));
    }
    let rank_a = p_a.trace().round();
    let xg = x.matmul(&pop.gamma)?.matmul(&pop.z.as_mat().transpose())?;
    let signal = p_a.congruence(&xg)?;
    pop.sigma().scale(rank_a).add(&signal)
}
