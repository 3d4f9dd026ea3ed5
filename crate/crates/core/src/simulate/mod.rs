//! Monte Carlo harness: draws data from the growth-curve population model,
//! checks the closed-form estimator expectations, and measures how well
//! each covariance estimate recovers `C(Z)` across error regimes.
//!
//! Replicates run in parallel, each on its own random stream, and are
//! aggregated in replicate order, so a report is a deterministic function
//! of its [`SimConfig`].

pub mod rng;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    covariance_triple, expected_covariances, moment_estimator, sigma_from_res, DataSet,
    PopulationModel,
};
use crate::matalg::{
    cholesky, subspace_distance, sym_eig, sym_eigenvalues, Mat, OrthonormalBasis, SymMat,
};
use crate::models::{fit_structured_exhaustive, SelectionOptions, Source, Variant};

pub use rng::NormalStream;

/// Entries of an averaged estimator must lie within this many Monte Carlo
/// standard errors of the closed form.
pub const SE_PASS_THRESHOLD: f64 = 4.0;

/// Draws used for the random-subspace chance baseline.
pub const BASELINE_DRAWS: usize = 4000;

pub const DEFAULT_SIGMA0_GRID: [f64; 7] = [0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub d: usize,
    pub n: usize,
    pub q: usize,
    pub p: usize,
    /// Ω = σ I_d.
    pub sigma: f64,
    /// Ω₀ = σ₀ I_{q−d}.
    pub sigma0: f64,
    /// V_x = σ_x² I_p.
    pub sigma_x: f64,
    /// Γ = γ [I_d; 0].
    pub gamma: f64,
    pub replicates: usize,
    pub seed: u64,
    pub sigma0_grid: Vec<f64>,
    /// Draw a fresh (Z, Z₀) for every replicate instead of one per experiment.
    pub redraw_population: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            d: 1,
            n: 250,
            q: 10,
            p: 1,
            sigma: 1.0,
            sigma0: 1.0,
            sigma_x: 1.0,
            gamma: 1.0,
            replicates: 1000,
            seed: 1,
            sigma0_grid: DEFAULT_SIGMA0_GRID.to_vec(),
            redraw_population: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d == 0 || self.d > self.p || self.d >= self.q {
            return bad(format!(
                "need 1 <= d <= p and d < q, got d = {}, p = {}, q = {}",
                self.d, self.p, self.q
            ));
        }
        if self.n < self.p + 2 {
            return bad(format!(
                "need n >= p + 2, got n = {}, p = {}",
                self.n, self.p
            ));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("sigma0", self.sigma0),
            ("sigma_x", self.sigma_x),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.gamma.is_finite() {
            return bad("gamma must be finite".into());
        }
        if self
            .sigma0_grid
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return bad("sigma0_grid entries must be positive".into());
        }
        Ok(())
    }
}

/// Population with a random orthonormal frame `[Z, Z₀]` (orthogonalized
/// standard normal q×q matrix, canonical signs), `μ = 0`, and the scalar
/// parameters of `config`.
pub fn random_population(config: &SimConfig, rng: &mut NormalStream) -> Result<PopulationModel> {
    config.validate()?;
    let (q, d, p) = (config.q, config.d, config.p);
    let frame = OrthonormalBasis::orthonormalize(&rng.normal_matrix(q, q))?;
    let z = frame.select(&(0..d).collect::<Vec<_>>())?;
    let z0 = frame.select(&(d..q).collect::<Vec<_>>())?;
    let gamma = Mat::from_fn(p, d, |i, j| if i == j { config.gamma } else { 0.0 });
    PopulationModel::new(
        vec![0.0; q],
        z,
        z0,
        gamma,
        vec![config.sigma * config.sigma; d],
        vec![config.sigma0 * config.sigma0; q - d],
        SymMat::identity(p).scale(config.sigma_x * config.sigma_x),
    )
}

/// Draws `n` rows: `x_i ~ N(0, V_x)` (then X is column-centered),
/// `ε_i ~ N(0, Σ)`, `y_i = μ + ZΓ'x_i + ε_i`. Returns the data and the noise
/// matrix. All of X is drawn before any noise.
pub fn generate_dataset_with_noise(
    pop: &PopulationModel,
    n: usize,
    rng: &mut NormalStream,
) -> Result<(DataSet, Mat)> {
    let (q, d, p) = (pop.q(), pop.d(), pop.p());
    let l = cholesky(pop.v_x.as_mat())?;
    let x = rng
        .normal_matrix(n, p)
        .matmul(&l.transpose())?
        .center_columns();

    let scale_z = Mat::from_fn(d, q, |i, j| pop.omega2[i].sqrt() * pop.z.as_mat()[(j, i)]);
    let scale_z0 = Mat::from_fn(q - d, q, |i, j| {
        pop.omega0_2[i].sqrt() * pop.z0.as_mat()[(j, i)]
    });
    let a = rng.normal_matrix(n, d);
    let b = rng.normal_matrix(n, q - d);
    let noise = a.matmul(&scale_z)?.add(&b.matmul(&scale_z0)?)?;

    let coef = pop.gamma.matmul(&pop.z.as_mat().transpose())?;
    let signal = x.matmul(&coef)?;
    let y = Mat::from_fn(n, q, |i, j| pop.mu[j] + signal[(i, j)] + noise[(i, j)]);
    Ok((DataSet::new(y, x)?, noise))
}

pub fn generate_dataset(
    pop: &PopulationModel,
    n: usize,
    rng: &mut NormalStream,
) -> Result<DataSet> {
    Ok(generate_dataset_with_noise(pop, n, rng)?.0)
}

/// Running entrywise sums for a mean and standard error.
#[derive(Clone, Debug)]
struct MatAccumulator {
    count: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    dim: usize,
}

impl MatAccumulator {
    fn new(dim: usize) -> Self {
        MatAccumulator {
            count: 0,
            sum: vec![0.0; dim * dim],
            sum_sq: vec![0.0; dim * dim],
            dim,
        }
    }

    fn push(&mut self, s: &SymMat) {
        self.count += 1;
        for (k, v) in s.as_mat().as_slice().iter().enumerate() {
            self.sum[k] += v;
            self.sum_sq[k] += v * v;
        }
    }

    fn mean(&self) -> SymMat {
        let c = self.count as f64;
        let m = Mat::new(self.dim, self.dim, self.sum.iter().map(|s| s / c).collect())
            .expect("finite sums");
        SymMat::symmetrize(&m).expect("square")
    }

    /// Standard error of each entry's mean.
    fn standard_errors(&self) -> Vec<f64> {
        let c = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, ss)| {
                if self.count < 2 {
                    return 0.0;
                }
                let mean = s / c;
                let var = ((ss - c * mean * mean) / (c - 1.0)).max(0.0);
                (var / c).sqrt()
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct ScalarAccumulator {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl ScalarAccumulator {
    fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn summary(&self) -> MeanSe {
        let c = self.count as f64;
        let mean = self.sum / c;
        let se = if self.count < 2 {
            0.0
        } else {
            (((self.sum_sq - c * mean * mean) / (c - 1.0)).max(0.0) / c).sqrt()
        };
        MeanSe { mean, se }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

/// Averaged estimator against its closed-form expectation.
#[derive(Clone, Debug)]
pub struct EstimatorCheck {
    pub name: &'static str,
    pub mean: SymMat,
    pub expected: SymMat,
    /// Largest `|mean − expected| / SE` over entries.
    pub max_se_deviation: f64,
    /// Largest `|mean − expected|` over entries, relative to the largest
    /// `|expected|` entry.
    pub max_rel_error: f64,
    /// Mean distance from the leading d eigenvectors to `C(Z)`.
    pub distance: MeanSe,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct RecoveryCell {
    pub sigma0: f64,
    pub source: Source,
    pub distance: MeanSe,
}

#[derive(Clone, Debug)]
pub struct SimReport {
    pub config: SimConfig,
    /// Distinct design ranks seen across replicates.
    pub r_x: Vec<usize>,
    pub checks: Vec<EstimatorCheck>,
    pub recovery: Vec<RecoveryCell>,
    /// Distance between `C(Z)` and an independent uniformly random
    /// d-subspace.
    pub chance_baseline: Option<MeanSe>,
    pub pass: bool,
}

impl SimReport {
    pub fn check(&self, name: &str) -> Option<&EstimatorCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn recovery_cell(&self, sigma0: f64, source: Source) -> Option<&RecoveryCell> {
        self.recovery
            .iter()
            .find(|c| c.sigma0 == sigma0 && c.source == source)
    }
}

const CHECK_NAMES: [&str; 5] = [
    "sigma_hat",
    "sigma_fit",
    "sigma_res",
    "moment",
    "sigma_from_res",
];

struct Replicate {
    observed: [SymMat; 5],
    expected: [SymMat; 5],
    distances: [f64; 5],
    r_x: usize,
}

fn experiment_population(config: &SimConfig) -> Result<PopulationModel> {
    random_population(
        config,
        &mut NormalStream::new(config.seed, rng::POPULATION_STREAM),
    )
}

fn leading_distance(s: &SymMat, z: &OrthonormalBasis) -> Result<f64> {
    let eig = sym_eig(s)?;
    subspace_distance(&eig.leading(z.rank()), z)
}

fn run_replicate(config: &SimConfig, fixed: &PopulationModel, r: usize) -> Result<Replicate> {
    let mut stream = NormalStream::new(config.seed, rng::replicate_stream(r));
    let redrawn;
    let pop = if config.redraw_population {
        redrawn = random_population(config, &mut stream)?;
        &redrawn
    } else {
        fixed
    };
    let data = generate_dataset(pop, config.n, &mut stream)?;
    let triple = covariance_triple(&data)?;
    let moment = moment_estimator(&triple)?;
    let from_res = sigma_from_res(&triple)?;
    let (e_hat, e_fit, e_res) = expected_covariances(pop, triple.n, triple.r_x)?;
    let nf = triple.n as f64;
    let rf = triple.r_x as f64;
    let e_moment = pop.signal().scale((nf - 1.0 - rf) / rf);
    let observed = [
        triple.sigma_hat,
        triple.sigma_fit,
        triple.sigma_res,
        moment,
        from_res,
    ];
    let mut distances = [0.0; 5];
    for (d, s) in distances.iter_mut().zip(&observed) {
        *d = leading_distance(s, &pop.z)?;
    }
    Ok(Replicate {
        observed,
        expected: [e_hat, e_fit, e_res, e_moment, pop.sigma()],
        distances,
        r_x: triple.r_x,
    })
}

/// Averages the estimators over replicates and compares every entry with
/// its closed-form expectation in Monte Carlo standard errors.
pub fn verify_expectations(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let pop = experiment_population(config)?;
    let replicates: Vec<Replicate> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, &pop, r))
        .collect::<Result<_>>()?;

    let q = config.q;
    let mut observed: Vec<MatAccumulator> = (0..5).map(|_| MatAccumulator::new(q)).collect();
    let mut expected: Vec<MatAccumulator> = (0..5).map(|_| MatAccumulator::new(q)).collect();
    let mut distances = [ScalarAccumulator::default(); 5];
    let mut ranks: Vec<usize> = Vec::new();
    for rep in &replicates {
        for k in 0..5 {
            observed[k].push(&rep.observed[k]);
            expected[k].push(&rep.expected[k]);
            distances[k].push(rep.distances[k]);
        }
        if !ranks.contains(&rep.r_x) {
            ranks.push(rep.r_x);
        }
    }
    ranks.sort_unstable();

    let checks: Vec<EstimatorCheck> = (0..5)
        .map(|k| {
            let mean = observed[k].mean();
            let exp = expected[k].mean();
            let se = observed[k].standard_errors();
            let scale = exp.as_mat().max_abs();
            let mut max_dev: f64 = 0.0;
            let mut max_abs_err: f64 = 0.0;
            for (idx, (m, e)) in mean
                .as_mat()
                .as_slice()
                .iter()
                .zip(exp.as_mat().as_slice())
                .enumerate()
            {
                let diff = (m - e).abs();
                max_abs_err = max_abs_err.max(diff);
                let dev = if se[idx] > 0.0 {
                    diff / se[idx]
                } else if diff <= 1e-12 * scale.max(1.0) {
                    0.0
                } else {
                    f64::INFINITY
                };
                max_dev = max_dev.max(dev);
            }
            EstimatorCheck {
                name: CHECK_NAMES[k],
                mean,
                expected: exp,
                max_se_deviation: max_dev,
                max_rel_error: if scale > 0.0 {
                    max_abs_err / scale
                } else {
                    max_abs_err
                },
                distance: distances[k].summary(),
                pass: max_dev <= SE_PASS_THRESHOLD,
            }
        })
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    Ok(SimReport {
        config: config.clone(),
        r_x: ranks,
        checks,
        recovery: Vec::new(),
        chance_baseline: None,
        pass,
    })
}

/// Distance from `z` to independent uniformly random subspaces of the same
/// rank (orthogonalized Gaussian matrices).
pub fn chance_baseline(z: &OrthonormalBasis, draws: usize, seed: u64) -> Result<MeanSe> {
    let mut stream = NormalStream::new(seed, rng::BASELINE_STREAM);
    let mut acc = ScalarAccumulator::default();
    for _ in 0..draws {
        let g = stream.normal_matrix(z.ambient_dim(), z.rank());
        let b = OrthonormalBasis::orthonormalize(&g)?;
        acc.push(subspace_distance(&b, z)?);
    }
    Ok(acc.summary())
}

/// For each σ₀ in the grid, fits model13 by exhaustive selection from each
/// candidate source and records the distance to the true `C(Z)`.
///
/// One population frame is used for the whole grid (unless
/// `redraw_population`); only Ω₀ changes between grid points.
pub fn recovery_experiment(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    if config.sigma0_grid.is_empty() {
        return Err(Error::InvalidArgument("sigma0_grid is empty".into()));
    }
    let base = experiment_population(config)?;
    let jobs: Vec<(usize, usize)> = (0..config.sigma0_grid.len())
        .flat_map(|g| (0..config.replicates).map(move |r| (g, r)))
        .collect();
    let options = SelectionOptions::default();

    let results: Vec<[f64; 3]> = jobs
        .par_iter()
        .map(|&(g, r)| -> Result<[f64; 3]> {
            let sigma0 = config.sigma0_grid[g];
            let mut stream = NormalStream::new(config.seed, rng::grid_stream(g, r));
            let frame = if config.redraw_population {
                random_population(config, &mut stream)?
            } else {
                base.clone()
            };
            let pop = PopulationModel {
                omega0_2: vec![sigma0 * sigma0; frame.q() - frame.d()],
                ..frame
            };
            let data = generate_dataset(&pop, config.n, &mut stream)?;
            let triple = covariance_triple(&data)?;
            let mut out = [0.0; 3];
            for (slot, source) in out.iter_mut().zip(Source::CANDIDATES) {
                let fit = fit_structured_exhaustive(
                    &triple,
                    config.d,
                    Variant::Model13,
                    source,
                    &options,
                )?;
                *slot = subspace_distance(&fit.z_hat.basis, &pop.z)?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut recovery = Vec::new();
    for (g, &sigma0) in config.sigma0_grid.iter().enumerate() {
        for (k, source) in Source::CANDIDATES.into_iter().enumerate() {
            let mut acc = ScalarAccumulator::default();
            for r in 0..config.replicates {
                acc.push(results[g * config.replicates + r][k]);
            }
            recovery.push(RecoveryCell {
                sigma0,
                source,
                distance: acc.summary(),
            });
        }
    }
    let chance = chance_baseline(&base.z, BASELINE_DRAWS, config.seed)?;
    Ok(SimReport {
        config: config.clone(),
        r_x: vec![config.p],
        checks: Vec::new(),
        recovery,
        chance_baseline: Some(chance),
        pass: true,
    })
}

/// `(λ_max − λ_min) / mean λ` of a symmetric matrix.
pub fn relative_eigen_spread(s: &SymMat) -> Result<f64> {
    let values = sym_eigenvalues(s)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok((values[0] - values[values.len() - 1]) / mean)
}

/// Source with the smallest mean distance at `sigma0`, and its margin over
/// the runner-up in combined standard errors.
pub fn regime_winner(report: &SimReport, sigma0: f64) -> Option<(Source, f64)> {
    let mut cells: Vec<&RecoveryCell> = report
        .recovery
        .iter()
        .filter(|c| c.sigma0 == sigma0)
        .collect();
    if cells.len() < 2 {
        return None;
    }
    cells.sort_by(|a, b| a.distance.mean.total_cmp(&b.distance.mean));
    let (best, second) = (cells[0], cells[1]);
    let se = (best.distance.se.powi(2) + second.distance.se.powi(2)).sqrt();
    let margin = (second.distance.mean - best.distance.mean) / se;
    Some((best.source, margin))
}
