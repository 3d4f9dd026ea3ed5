//! Command-line front end: argument and config handling, data ingestion,
//! and report generation for the `pfcreduce` binary.

pub mod config;
pub mod io;
pub mod report;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

pub use io::{load_matrix, write_matrix};
pub use report::Report;

use crate::error::{Error, Result};
use crate::estimators::{DataSet, PopulationModel};
use crate::models::{
    fit_pc, fit_pfc_isotonic, fit_structured, FitInput, Selection, SelectionOptions, Source,
    Variant, DEFAULT_SUBSET_CAP,
};
use crate::simulate::{
    generate_dataset, random_population, recovery_experiment, regime_winner, rng,
    verify_expectations, NormalStream, SimConfig, SimReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Fit,
    Simulate,
    Verify,
    Recover,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Recover => "recover",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Pc,
    PfcIso,
    Structured10,
    Structured13,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Pc => "pc",
            Model::PfcIso => "pfc-iso",
            Model::Structured10 => "structured10",
            Model::Structured13 => "structured13",
        }
    }

    fn needs_x(self) -> bool {
        matches!(self, Model::PfcIso | Model::Structured13)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pc" => Ok(Model::Pc),
            "pfc-iso" => Ok(Model::PfcIso),
            "structured10" => Ok(Model::Structured10),
            "structured13" => Ok(Model::Structured13),
            other => Err(Error::Usage(format!("unknown model '{other}'"))),
        }
    }
}

/// Effective settings of one invocation, after the config file and flags
/// have been merged.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub model: Option<Model>,
    pub source: Source,
    pub selection: Selection,
    pub d: Option<usize>,
    pub y_path: Option<PathBuf>,
    pub x_path: Option<PathBuf>,
    pub out: PathBuf,
    pub has_header: bool,
    pub center_x: bool,
    pub subset_cap: u128,
    pub sim: SimConfig,
}

impl RunConfig {
    pub fn new(command: Command, out: PathBuf) -> Self {
        RunConfig {
            command,
            model: None,
            source: Source::SigmaHat,
            selection: Selection::Exhaustive,
            d: None,
            y_path: None,
            x_path: None,
            out,
            has_header: false,
            center_x: true,
            subset_cap: DEFAULT_SUBSET_CAP,
            sim: SimConfig::default(),
        }
    }

    /// Applies `key = value` settings from a config file.
    pub fn apply_entries(&mut self, entries: &[config::Entry]) -> Result<()> {
        for e in entries {
            match (self.command, e.key.as_str()) {
                (Command::Fit, "model") => self.model = Some(e.value.parse()?),
                (Command::Fit, "source") => self.source = e.value.parse()?,
                (Command::Fit, "selection") => self.selection = e.value.parse()?,
                (Command::Fit, "d") => self.d = Some(e.parse()?),
                (Command::Fit, "y") => self.y_path = Some(PathBuf::from(&e.value)),
                (Command::Fit, "x") => self.x_path = Some(PathBuf::from(&e.value)),
                (Command::Fit, "header") => self.has_header = e.parse_bool()?,
                (Command::Fit, "center_x") => self.center_x = e.parse_bool()?,
                (Command::Fit, "subset_cap") => self.subset_cap = e.parse()?,
                (Command::Fit, _) => return Err(e.unknown()),
                (_, "d") => self.sim.d = e.parse()?,
                (_, "n") => self.sim.n = e.parse()?,
                (_, "q") => self.sim.q = e.parse()?,
                (_, "p") => self.sim.p = e.parse()?,
                (_, "sigma") => self.sim.sigma = e.parse()?,
                (_, "sigma0") => self.sim.sigma0 = e.parse()?,
                (_, "sigma_x") => self.sim.sigma_x = e.parse()?,
                (_, "gamma") => self.sim.gamma = e.parse()?,
                (_, "replicates") => self.sim.replicates = e.parse()?,
                (_, "seed") => self.sim.seed = e.parse()?,
                (_, "sigma0_grid") => self.sim.sigma0_grid = e.parse_list()?,
                (_, "redraw_population") => self.sim.redraw_population = e.parse_bool()?,
                _ => return Err(e.unknown()),
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.command == Command::Fit {
            let model = self
                .model
                .ok_or_else(|| Error::Usage("fit needs --model".into()))?;
            if self.y_path.is_none() {
                return Err(Error::Usage("fit needs --y".into()));
            }
            if self.d.is_none() {
                return Err(Error::Usage("fit needs --d".into()));
            }
            if model.needs_x() && self.x_path.is_none() {
                return Err(Error::Usage(format!("model {model} needs --x")));
            }
        } else {
            self.sim
                .validate()
                .map_err(|e| Error::Usage(e.to_string()))?;
        }
        Ok(())
    }

    fn echo(&self, r: &mut Report) {
        r.section("config").str("command", self.command.name());
        if self.command == Command::Fit {
            r.str("model", self.model.map_or("", Model::name))
                .str("source", self.source.name())
                .str("selection", self.selection.name())
                .int("d", self.d.unwrap_or(0) as u64)
                .str("y", &path_str(self.y_path.as_deref()))
                .str("x", &path_str(self.x_path.as_deref()))
                .bool("header", self.has_header)
                .bool("center_x", self.center_x)
                .str("subset_cap", &self.subset_cap.to_string());
        } else {
            let s = &self.sim;
            r.int("d", s.d as u64)
                .int("n", s.n as u64)
                .int("q", s.q as u64)
                .int("p", s.p as u64)
                .num("sigma", s.sigma)
                .num("sigma0", s.sigma0)
                .num("sigma_x", s.sigma_x)
                .num("gamma", s.gamma)
                .int("replicates", s.replicates as u64)
                .str("seed", &s.seed.to_string())
                .nums("sigma0_grid", &s.sigma0_grid)
                .bool("redraw_population", s.redraw_population);
        }
        r.str("out", &self.out.display().to_string());
    }
}

fn path_str(p: Option<&Path>) -> String {
    p.map(|p| p.display().to_string()).unwrap_or_default()
}

#[derive(Parser, Debug)]
#[command(
    name = "pfcreduce",
    version,
    about = "Principal component and principal fitted component dimension reduction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Subcommand, Debug)]
pub enum Commands {
    /// Estimate C(Z) from data files
    Fit(FitArgs),
    /// Draw one data set from the population model and write it as CSV
    Simulate(SimArgs),
    /// Monte Carlo check of the closed-form estimator expectations
    Verify(SimArgs),
    /// Subspace recovery by covariance source over a sigma0 grid
    Recover(SimArgs),
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// pc | pfc-iso | structured10 | structured13
    #[arg(long)]
    pub model: Option<String>,
    /// Response matrix Y (CSV, one observation per row)
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Design matrix X (CSV)
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Reduction dimension
    #[arg(long)]
    pub d: Option<usize>,
    /// Candidate eigenvectors for structured models: sigma_hat | sigma_fit | sigma_res
    #[arg(long)]
    pub source: Option<String>,
    /// exhaustive | sequential
    #[arg(long)]
    pub selection: Option<String>,
    /// Input files start with a header row
    #[arg(long)]
    pub header: bool,
    /// Mean-center the columns of X (default true)
    #[arg(long)]
    pub center_x: Option<bool>,
    /// Largest number of subsets exhaustive selection may evaluate
    #[arg(long)]
    pub subset_cap: Option<u128>,
    /// Optional key = value file; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    /// key = value simulation settings; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long)]
    pub sigma_x: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated list of sigma0 values
    #[arg(long)]
    pub sigma0_grid: Option<String>,
    #[arg(long)]
    pub redraw_population: bool,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        match cli.command {
            Commands::Fit(a) => {
                let mut cfg = RunConfig::new(Command::Fit, a.out);
                if let Some(path) = &a.config {
                    cfg.apply_entries(&config::read_entries(path)?)?;
                }
                if let Some(m) = a.model {
                    cfg.model = Some(m.parse()?);
                }
                if let Some(s) = a.source {
                    cfg.source = s.parse()?;
                }
                if let Some(s) = a.selection {
                    cfg.selection = s.parse()?;
                }
                cfg.d = a.d.or(cfg.d);
                cfg.y_path = a.y.or(cfg.y_path);
                cfg.x_path = a.x.or(cfg.x_path);
                cfg.has_header |= a.header;
                cfg.center_x = a.center_x.unwrap_or(cfg.center_x);
                cfg.subset_cap = a.subset_cap.unwrap_or(cfg.subset_cap);
                Ok(cfg)
            }
            Commands::Simulate(a) => RunConfig::from_sim(Command::Simulate, a),
            Commands::Verify(a) => RunConfig::from_sim(Command::Verify, a),
            Commands::Recover(a) => RunConfig::from_sim(Command::Recover, a),
        }
    }

    fn from_sim(command: Command, a: SimArgs) -> Result<Self> {
        let mut cfg = RunConfig::new(command, a.out);
        if let Some(path) = &a.config {
            cfg.apply_entries(&config::read_entries(path)?)?;
        }
        let s = &mut cfg.sim;
        s.d = a.d.unwrap_or(s.d);
        s.n = a.n.unwrap_or(s.n);
        s.q = a.q.unwrap_or(s.q);
        s.p = a.p.unwrap_or(s.p);
        s.sigma = a.sigma.unwrap_or(s.sigma);
        s.sigma0 = a.sigma0.unwrap_or(s.sigma0);
        s.sigma_x = a.sigma_x.unwrap_or(s.sigma_x);
        s.gamma = a.gamma.unwrap_or(s.gamma);
        s.replicates = a.replicates.unwrap_or(s.replicates);
        s.seed = a.seed.unwrap_or(s.seed);
        if let Some(grid) = a.sigma0_grid {
            s.sigma0_grid = config::parse_float_list(&grid)?;
        }
        s.redraw_population |= a.redraw_population;
        Ok(cfg)
    }
}

/// Runs the configured pipeline, writes the report to `config.out`, and
/// returns its text.
pub fn run(config: &RunConfig) -> Result<String> {
    config.validate()?;
    let mut report = Report::new("pfcreduce report");
    config.echo(&mut report);
    match config.command {
        Command::Fit => run_fit(config, &mut report)?,
        Command::Simulate => run_simulate(config, &mut report)?,
        Command::Verify => {
            let sim = verify_expectations(&config.sim)?;
            write_verify(&sim, &mut report);
        }
        Command::Recover => {
            let sim = recovery_experiment(&config.sim)?;
            write_recovery(&sim, &mut report);
        }
    }
    let text = report.finish();
    fs::write(&config.out, &text).map_err(|source| Error::Io {
        path: config.out.clone(),
        source,
    })?;
    Ok(text)
}

fn run_fit(config: &RunConfig, r: &mut Report) -> Result<()> {
    let model = config.model.expect("validated");
    let d = config.d.expect("validated");
    let y = load_matrix(
        config.y_path.as_deref().expect("validated"),
        config.has_header,
    )?;
    let data = match &config.x_path {
        Some(path) => {
            let x = load_matrix(path, config.has_header)?;
            Some(DataSet::with_centering(y.clone(), x, config.center_x)?)
        }
        None => None,
    };
    r.section("result")
        .str("status", "ok")
        .str("model", model.name());
    if let Some(data) = &data {
        r.bool("x_centered", data.centered_x());
    }
    match model {
        Model::Pc => {
            let est = fit_pc(&y, d)?;
            r.str("source", est.source.name())
                .ints(
                    "selected_indices",
                    est.selected_indices.as_deref().unwrap_or(&[]),
                )
                .matrix("basis", est.basis.as_mat())
                .strs("warnings", &est.warnings);
        }
        Model::PfcIso => {
            let fit = fit_pfc_isotonic(data.as_ref().expect("validated"), d)?;
            r.str("source", fit.z_hat.source.name())
                .ints(
                    "selected_indices",
                    fit.z_hat.selected_indices.as_deref().unwrap_or(&[]),
                )
                .matrix("basis", fit.z_hat.basis.as_mat())
                .num("log_lik", fit.log_lik)
                .num("sse", fit.sse)
                .num("sigma2_hat", fit.sigma2_hat)
                .nums("mu_hat", &fit.mu_hat)
                .matrix("gamma_hat", &fit.gamma_hat)
                .strs("warnings", &fit.z_hat.warnings);
        }
        Model::Structured10 | Model::Structured13 => {
            let variant = if model == Model::Structured10 {
                Variant::Model10
            } else {
                Variant::Model13
            };
            let input = match &data {
                Some(data) => FitInput::Data(data),
                None => FitInput::Response(&y),
            };
            let options = SelectionOptions {
                subset_cap: config.subset_cap,
            };
            let fit = fit_structured(input, d, variant, config.source, config.selection, &options)?;
            r.str("variant", variant.name())
                .str("source", fit.z_hat.source.name())
                .str("selection", config.selection.name())
                .ints("selected_indices", fit.selected_indices())
                .matrix("basis", fit.z_hat.basis.as_mat())
                .num("log_lik", fit.log_lik)
                .nums("omega2_hat", &fit.omega2_hat)
                .nums("omega0_2_hat", &fit.omega0_2_hat)
                .bool("omega_nondiagonal", fit.omega_nondiagonal)
                .nums("loglik_path", &fit.path)
                .int("evaluations", fit.evaluations as u64);
        }
    }
    Ok(())
}

/// Paths `<stem>.y.csv` and `<stem>.x.csv` beside the report.
pub fn simulated_data_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "simulated".into());
    let dir = out.parent().unwrap_or(Path::new(""));
    (
        dir.join(format!("{stem}.y.csv")),
        dir.join(format!("{stem}.x.csv")),
    )
}

fn write_population(pop: &PopulationModel, r: &mut Report) {
    r.section("population")
        .matrix("z", pop.z.as_mat())
        .matrix("z0", pop.z0.as_mat())
        .nums("mu", &pop.mu)
        .matrix("gamma", &pop.gamma)
        .nums("omega2", &pop.omega2)
        .nums("omega0_2", &pop.omega0_2)
        .matrix("v_x", pop.v_x.as_mat())
        .matrix("sigma", pop.sigma().as_mat());
}

fn run_simulate(config: &RunConfig, r: &mut Report) -> Result<()> {
    let sim = &config.sim;
    let pop = random_population(
        sim,
        &mut NormalStream::new(sim.seed, rng::POPULATION_STREAM),
    )?;
    let data = generate_dataset(
        &pop,
        sim.n,
        &mut NormalStream::new(sim.seed, rng::replicate_stream(0)),
    )?;
    let (y_path, x_path) = simulated_data_paths(&config.out);
    write_matrix(&y_path, data.y())?;
    write_matrix(&x_path, data.x())?;
    r.section("result")
        .str("status", "ok")
        .str("y", &y_path.display().to_string())
        .str("x", &x_path.display().to_string())
        .int("n", data.n() as u64)
        .int("q", data.q() as u64)
        .int("p", data.p() as u64);
    write_population(&pop, r);
    Ok(())
}

fn write_verify(sim: &SimReport, r: &mut Report) {
    r.section("result")
        .str("status", if sim.pass { "pass" } else { "fail" })
        .num("se_threshold", crate::simulate::SE_PASS_THRESHOLD)
        .ints("r_x", &sim.r_x);
    for c in &sim.checks {
        r.section(&format!("expectations.{}", c.name))
            .bool("pass", c.pass)
            .num("max_se_deviation", c.max_se_deviation)
            .num("max_rel_error", c.max_rel_error)
            .num("distance_mean", c.distance.mean)
            .num("distance_se", c.distance.se)
            .matrix("mean", c.mean.as_mat())
            .matrix("expected", c.expected.as_mat());
    }
}

fn write_recovery(sim: &SimReport, r: &mut Report) {
    r.section("result").str("status", "ok");
    if let Some(b) = sim.chance_baseline {
        r.section("chance_baseline")
            .num("mean_distance", b.mean)
            .num("se", b.se);
    }
    for cell in &sim.recovery {
        r.table_entry("recovery")
            .num("sigma0", cell.sigma0)
            .str("source", cell.source.name())
            .num("mean_distance", cell.distance.mean)
            .num("se", cell.distance.se);
    }
    for &sigma0 in &sim.config.sigma0_grid {
        if let Some((winner, margin)) = regime_winner(sim, sigma0) {
            r.table_entry("regime")
                .num("sigma0", sigma0)
                .str("best_source", winner.name())
                .num("margin_se", margin);
        }
    }
}

/// One-line, machine-parsable error description.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ");
    format!(
        "error: code={} kind={} message={:?}",
        e.exit_code(),
        e.code(),
        msg
    )
}

/// Full entry point: parses `args`, runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            eprintln!("{}", error_line(&Error::Usage(first.to_string())));
            return 2;
        }
    };
    match RunConfig::from_cli(cli).and_then(|cfg| run(&cfg)) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            e.exit_code()
        }
    }
}
