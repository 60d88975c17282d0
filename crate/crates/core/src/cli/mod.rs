//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation or runtime failure, 2 bad
//! configuration, 3 size guard exceeded, 4 attractor space not certified.

pub mod config;
pub mod output;
pub mod validate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::attractors::{
    self, asymptotic_marginal_pure, build_basis, dimension_report, fastpath_marginal_pure, lambda_multiset,
    AsymptoticDecomposition, StateSource,
};
use crate::channel::{EdgeConfiguration, PercolationChannel, PercolationModel};
use crate::error::{Error, Result};
use crate::evolution::{evolve_exact, evolve_mc, evolve_unitary, DensityOperator};
use config::{coin_from_args, lattice_from_args, InitialState, Method, Mode, RunConfig};
use output::{write_distribution, write_json_value, Metadata};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_CERTIFICATION: i32 = 4;

/// Largest Hilbert dimension for exact density-matrix evolution.
pub const EXACT_GUARD: usize = attractors::DENSE_GUARD;

#[derive(Debug, Parser)]
#[command(name = "perqwalk", version, about = "Coined quantum walks on dynamically percolated lattices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time evolution: exact channel, Monte Carlo trajectories or a unitary walk.
    Evolve(RunArgs),
    /// Asymptotic position distribution from the attractor space.
    Asymptotic(RunArgs),
    /// Attractor-space dimension report.
    Attractors(RunArgs),
    /// Run an invariant suite on built-in instances.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Lattice extents as MxN.
    #[arg(long)]
    pub size: String,
    #[arg(long, default_value = "periodic")]
    pub boundary_s: String,
    #[arg(long, default_value = "periodic")]
    pub boundary_t: String,
    /// hadamard2d, grover, fourier or custom (with --coin-file).
    #[arg(long, default_value = "hadamard2d")]
    pub coin: String,
    /// JSON 4x4 array of [re, im] pairs in basis order (L, D, U, R).
    #[arg(long)]
    pub coin_file: Option<PathBuf>,
    /// Edge presence probability.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub steps: usize,
    /// exact, mc or unitary (evolve); asymptotic is implied by that subcommand.
    #[arg(long, default_value = "exact")]
    pub mode: String,
    /// eq5, fastpath or auto.
    #[arg(long, default_value = "auto")]
    pub method: String,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pure product state "s,t:L=<re>[+<im>i],D=...,U=...,R=...".
    #[arg(long)]
    pub initial: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// cptp, oracle, eigenstates, stationarity, pindep or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn to_config(&self, implied_mode: Option<Mode>) -> Result<RunConfig> {
        let spec = lattice_from_args(&self.size, &self.boundary_s, &self.boundary_t)?;
        let (coin, coin_source) = coin_from_args(&self.coin, self.coin_file.as_deref())?;
        PercolationModel::new(self.p)?;
        let initial = self.initial.as_deref().map(str::parse::<InitialState>).transpose()?;
        if let Some(init) = &initial {
            init.to_state(&spec)?;
        }
        Ok(RunConfig {
            spec,
            coin,
            coin_source,
            p: self.p,
            steps: self.steps,
            mode: match implied_mode {
                Some(m) => m,
                None => self.mode.parse()?,
            },
            method: self.method.parse()?,
            trials: self.trials,
            seed: self.seed,
            initial,
            out: self.out.clone(),
            format: self.format.parse()?,
        })
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_)
        | Error::InvalidLattice(_)
        | Error::OutOfRange(_)
        | Error::NonUnitaryCoin { .. }
        | Error::InvalidState(_)
        | Error::InvalidProbability(_)
        | Error::DegenerateProbability { .. }
        | Error::WrongCoin(_)
        | Error::Json(_) => EXIT_PARSE,
        Error::Guard { .. } => EXIT_GUARD,
        Error::Certification(_) => EXIT_CERTIFICATION,
        Error::DimensionMismatch { .. } | Error::Verification(_) | Error::Linalg(_) | Error::Io(_) => EXIT_FAILURE,
    }
}

fn channel(cfg: &RunConfig) -> Result<PercolationChannel> {
    Ok(PercolationChannel::new(cfg.spec, cfg.coin.clone(), PercolationModel::new(cfg.p)?))
}

fn metadata(command: &str, cfg: &RunConfig) -> Metadata {
    let mut meta = Metadata::new(command, cfg.spec.to_spec_string(), cfg.coin_source.clone(), cfg.p);
    meta.initial = cfg.initial.as_ref().map(|i| i.text.clone());
    meta
}

fn require_initial(cfg: &RunConfig) -> Result<&InitialState> {
    cfg.initial.as_ref().ok_or_else(|| Error::Parse("--initial is required".into()))
}

pub fn cmd_evolve(cfg: &RunConfig) -> Result<()> {
    let ch = channel(cfg)?;
    let psi0 = require_initial(cfg)?.to_state(&cfg.spec)?;
    let mut meta = metadata("evolve", cfg);
    meta.mode = Some(cfg.mode.as_str().into());
    meta.steps = Some(cfg.steps);
    let (dist, stderr) = match cfg.mode {
        Mode::Exact => {
            if cfg.spec.dim() > EXACT_GUARD {
                return Err(Error::Guard { guard: "exact evolution", dim: cfg.spec.dim(), limit: EXACT_GUARD });
            }
            let rho = evolve_exact(&ch, &DensityOperator::pure(&psi0), cfg.steps)?;
            (rho.position_marginal(&cfg.spec)?, None)
        }
        Mode::Unitary => {
            let full = EdgeConfiguration::full(&cfg.spec);
            let psi = evolve_unitary(&cfg.spec, &cfg.coin, &full, &psi0, cfg.steps)?;
            (psi.position_marginal(&cfg.spec)?, None)
        }
        Mode::Mc => {
            meta.trials = Some(cfg.trials);
            meta.seed = Some(cfg.seed);
            let est = evolve_mc(&ch, &psi0, cfg.steps, cfg.trials, cfg.seed)?;
            (est.mean, Some(est.stderr))
        }
        Mode::Asymptotic => return Err(Error::Parse("use the asymptotic subcommand".into())),
    };
    write_distribution(cfg.out.as_deref(), cfg.format, meta, &dist, stderr)
}

pub fn cmd_asymptotic(cfg: &RunConfig) -> Result<()> {
    let ch = channel(cfg)?;
    let psi0 = require_initial(cfg)?.to_state(&cfg.spec)?;
    if cfg.spec.dim() > attractors::DENSE_GUARD {
        return Err(Error::Guard {
            guard: "asymptotic evaluation",
            dim: cfg.spec.dim(),
            limit: attractors::DENSE_GUARD,
        });
    }
    let basis = build_basis(&ch, StateSource::Auto)?;
    let decomp = AsymptoticDecomposition::from_basis(&basis);
    let (method, dist) = match cfg.method {
        Method::Eq5 => (Method::Eq5, asymptotic_marginal_pure(&basis, &psi0, cfg.steps as u64)?),
        Method::Fastpath => (Method::Fastpath, fastpath_marginal_pure(&decomp, &ch, &psi0)?),
        Method::Auto if basis.completeness().allows_fastpath() => {
            (Method::Fastpath, fastpath_marginal_pure(&decomp, &ch, &psi0)?)
        }
        Method::Auto => (Method::Eq5, asymptotic_marginal_pure(&basis, &psi0, cfg.steps as u64)?),
    };
    let mut meta = metadata("asymptotic", cfg);
    meta.mode = Some(Mode::Asymptotic.as_str().into());
    meta.steps = Some(cfg.steps);
    meta.method = Some(method.as_str().into());
    meta.attractor_dimension = Some(basis.len());
    meta.completeness = Some(basis.completeness().as_str().into());
    write_distribution(cfg.out.as_deref(), cfg.format, meta, &dist, None)
}

pub fn cmd_attractors(cfg: &RunConfig) -> Result<()> {
    let ch = channel(cfg)?;
    let report = dimension_report(&ch)?;
    let basis = build_basis(&ch, StateSource::Numeric)?;
    let value = json!({
        "schema": output::SCHEMA,
        "lattice": cfg.spec.to_spec_string(),
        "coin": cfg.coin_source,
        "p": cfg.p,
        "analytic_count": report.analytic_count,
        "numeric_count": report.numeric_count,
        "eigenstates": report.eigenstates,
        "match": report.matches,
        "completeness": basis.completeness().as_str(),
        "eigenvalues": lambda_multiset(&basis),
    });
    write_json_value(cfg.out.as_deref(), &value)?;
    if report.matches {
        Ok(())
    } else {
        Err(Error::Verification(format!(
            "numeric count {} differs from closed form {:?}",
            report.numeric_count, report.analytic_count
        )))
    }
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<bool> {
    let suite: validate::Suite = args.suite.parse()?;
    let report = validate::run(suite)?;
    write_json_value(args.out.as_deref(), &serde_json::to_value(&report)?)?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAILED {}: {:.3e} > {:.1e}", c.name, c.value, c.tolerance);
    }
    Ok(report.passed)
}

fn configure_threads() {
    if let Some(n) = std::env::var("PERQWALK_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Evolve(a) => a.to_config(None).and_then(|c| cmd_evolve(&c)).map(|_| true),
        Command::Asymptotic(a) => a.to_config(Some(Mode::Asymptotic)).and_then(|c| cmd_asymptotic(&c)).map(|_| true),
        Command::Attractors(a) => a.to_config(Some(Mode::Asymptotic)).and_then(|c| cmd_attractors(&c)).map(|_| true),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
