use std::str::FromStr;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic;
use crate::attractors::{
    asymptotic_marginal, build_basis, find_common_eigenstates_numeric, verify_common_eigenstate, StateSource,
};
use crate::channel::{apply_by_enumeration, sample_config, PercolationChannel, PercolationModel};
use crate::coin::CoinOperator;
use crate::error::{Error, Result};
use crate::evolution::DensityOperator;
use crate::lattice::{Boundary, LatticeSpec};
use crate::linalg::{self, c64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Cptp,
    Oracle,
    Eigenstates,
    Stationarity,
    Pindep,
    All,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Cptp => "cptp",
            Suite::Oracle => "oracle",
            Suite::Eigenstates => "eigenstates",
            Suite::Stationarity => "stationarity",
            Suite::Pindep => "pindep",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cptp" => Ok(Suite::Cptp),
            "oracle" => Ok(Suite::Oracle),
            "eigenstates" => Ok(Suite::Eigenstates),
            "stationarity" => Ok(Suite::Stationarity),
            "pindep" => Ok(Suite::Pindep),
            "all" => Ok(Suite::All),
            _ => Err(Error::Parse(format!("unknown suite {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

struct Checks(Vec<Check>);

impl Checks {
    fn at_most(&mut self, name: String, value: f64, tolerance: f64) {
        let passed = value <= tolerance;
        self.0.push(Check { name, value, tolerance, passed });
    }
}

fn coins() -> [CoinOperator; 3] {
    [CoinOperator::hadamard2d(), CoinOperator::grover(), CoinOperator::fourier()]
}

fn variants(m: usize, n: usize) -> Vec<LatticeSpec> {
    let b = [Boundary::Periodic, Boundary::Open];
    b.iter().flat_map(|&bs| b.iter().map(move |&bt| LatticeSpec::new(m, n, bs, bt).expect("valid size"))).collect()
}

pub fn random_density(d: usize, rng: &mut impl Rng) -> DensityOperator {
    let a = Mat::<c64>::from_fn(d, d, |_, _| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let h = &a * a.adjoint();
    let tr: f64 = (0..d).map(|i| h[(i, i)].re).sum();
    let data = (0..d * d).map(|k| {
        let (i, j) = (k / d, k % d);
        // exact Hermitian symmetry
        if i <= j {
            h[(i, j)] / tr
        } else {
            h[(j, i)].conj() / tr
        }
    });
    DensityOperator::new(d, data.collect()).expect("random density is valid")
}

fn cptp(checks: &mut Checks, rng: &mut ChaCha8Rng) -> Result<()> {
    for spec in [LatticeSpec::torus(3, 3)?, LatticeSpec::carpet(3, 3)?] {
        for coin in coins() {
            let name = format!("{spec} {}", coin.name());
            let ch = PercolationChannel::new(spec, coin, PercolationModel::new(0.5)?);
            let mut rho = random_density(spec.dim(), rng);
            for _ in 0..1000 {
                rho = ch.apply(&rho)?;
            }
            checks.at_most(format!("trace drift {name}"), (rho.trace() - linalg::ONE).norm(), 1e-12);
            checks.at_most(format!("hermiticity {name}"), rho.hermiticity_residual(), 1e-12);
            checks.at_most(format!("negativity {name}"), (-rho.min_eigenvalue()?).max(0.0), 1e-10);
        }
    }
    Ok(())
}

fn oracle(checks: &mut Checks, rng: &mut ChaCha8Rng) -> Result<()> {
    for spec in variants(3, 3) {
        if spec.num_edges() > crate::channel::ENUMERATION_MAX_EDGES {
            continue;
        }
        let ch = PercolationChannel::new(spec, CoinOperator::hadamard2d(), PercolationModel::new(0.5)?);
        let rho = random_density(spec.dim(), rng);
        let fast = ch.apply(&rho)?;
        let slow = apply_by_enumeration(&ch, &rho)?;
        checks.at_most(format!("pairwise vs enumeration {spec}"), fast.max_abs_diff(&slow), 1e-12);
    }
    Ok(())
}

fn eigenstates(checks: &mut Checks, rng: &mut ChaCha8Rng) -> Result<()> {
    for spec in variants(3, 3).into_iter().chain(variants(3, 4)) {
        for coin in coins() {
            let name = format!("{spec} {}", coin.name());
            let ch = PercolationChannel::new(spec, coin.clone(), PercolationModel::new(0.5)?);
            let mut configs = ch.generator_configs();
            configs.extend((0..50).map(|_| sample_config(ch.model(), &spec, rng)));
            let closed = analytic::states(&spec, &coin)?;
            let worst = closed
                .iter()
                .map(|s| verify_common_eigenstate(&ch, s.vector(), s.alpha(), &configs))
                .fold(0.0, f64::max);
            checks.at_most(format!("analytic residual {name}"), worst, 1e-10);
            let numeric = find_common_eigenstates_numeric(&ch)?.states;
            let a: Vec<Vec<c64>> = closed.iter().map(|s| s.vector().to_vec()).collect();
            let b: Vec<Vec<c64>> = numeric.iter().map(|s| s.vector().to_vec()).collect();
            checks.at_most(format!("span angle {name}"), linalg::max_principal_sine(&a, &b), 1e-8);
        }
    }
    Ok(())
}

fn stationarity(checks: &mut Checks, rng: &mut ChaCha8Rng) -> Result<()> {
    for spec in [LatticeSpec::torus(3, 3)?, LatticeSpec::torus(4, 3)?, LatticeSpec::carpet(3, 3)?] {
        for coin in coins() {
            let name = format!("{spec} {}", coin.name());
            let ch = PercolationChannel::new(spec, coin, PercolationModel::new(0.5)?);
            let basis = build_basis(&ch, StateSource::Auto)?;
            let rho0 = random_density(spec.dim(), rng);
            let rho = crate::attractors::asymptotic_state(&basis, &rho0, 0)?;
            let before = rho.position_marginal(&spec)?;
            let after = ch.apply(&rho)?.position_marginal(&spec)?;
            checks.at_most(format!("marginal change {name}"), before.l1_distance(&after), 1e-8);
        }
    }
    Ok(())
}

fn pindep(checks: &mut Checks, rng: &mut ChaCha8Rng) -> Result<()> {
    for spec in [LatticeSpec::torus(3, 3)?, LatticeSpec::torus(4, 3)?, LatticeSpec::carpet(3, 3)?] {
        for coin in coins() {
            let name = format!("{spec} {}", coin.name());
            let rho0 = random_density(spec.dim(), rng);
            let mut marginals = Vec::new();
            for p in [0.3, 0.7] {
                let ch = PercolationChannel::new(spec, coin.clone(), PercolationModel::new(p)?);
                let basis = build_basis(&ch, StateSource::Numeric)?;
                marginals.push(asymptotic_marginal(&basis, &rho0, 0)?);
            }
            checks.at_most(format!("p = 0.3 vs 0.7 {name}"), marginals[0].l1_distance(&marginals[1]), 1e-10);
        }
    }
    Ok(())
}

/// Runs the named suite on a fixed set of small instances.
pub fn run(suite: Suite) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checks = Checks(Vec::new());
    let all = suite == Suite::All;
    if all || suite == Suite::Cptp {
        cptp(&mut checks, &mut rng)?;
    }
    if all || suite == Suite::Oracle {
        oracle(&mut checks, &mut rng)?;
    }
    if all || suite == Suite::Eigenstates {
        eigenstates(&mut checks, &mut rng)?;
    }
    if all || suite == Suite::Stationarity {
        stationarity(&mut checks, &mut rng)?;
    }
    if all || suite == Suite::Pindep {
        pindep(&mut checks, &mut rng)?;
    }
    let passed = checks.0.iter().all(|c| c.passed);
    Ok(Report { schema: super::output::SCHEMA, suite: suite.as_str().into(), passed, checks: checks.0 })
}
