//! Density operators, pure states, position marginals and the three time
//! evolution engines: exact channel iteration, a fixed-configuration unitary
//! walk, and Monte Carlo trajectory sampling.

use faer::Mat;
use rayon::prelude::*;

use crate::channel::{EdgeConfiguration, PercolationChannel, StepUnitary, Substreams};
use crate::coin::CoinOperator;
use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticeSpec, Site};
use crate::linalg::{self, c64, ZERO};

pub const NORM_TOL: f64 = 1e-12;

/// Dense `d x d` density matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    dim: usize,
    data: Vec<c64>,
}

impl DensityOperator {
    /// Validated constructor: Hermitian and unit trace within `1e-12`.
    pub fn new(dim: usize, data: Vec<c64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: data.len() });
        }
        let rho = DensityOperator { dim, data };
        let herm = rho.hermiticity_residual();
        if herm > NORM_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (residual {herm:.3e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        Ok(rho)
    }

    pub(crate) fn from_raw(dim: usize, data: Vec<c64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        DensityOperator { dim, data }
    }

    pub fn pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        let d = a.len();
        let mut data = vec![ZERO; d * d];
        for (i, row) in data.chunks_exact_mut(d).enumerate() {
            for (j, z) in row.iter_mut().enumerate() {
                *z = a[i] * a[j].conj();
            }
        }
        DensityOperator { dim: d, data }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = c64::new(1.0 / dim as f64, 0.0);
        }
        DensityOperator { dim, data }
    }

    /// Convex mixture `sum_k w_k |psi_k><psi_k|`.
    pub fn mixture(parts: &[(f64, StateVector)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::InvalidState("empty mixture".into()));
        };
        let d = first.dim();
        let mut data = vec![ZERO; d * d];
        for (w, psi) in parts {
            if psi.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: psi.dim() });
            }
            let p = DensityOperator::pure(psi);
            for (z, y) in data.iter_mut().zip(&p.data) {
                *z += y * *w;
            }
        }
        DensityOperator::new(d, data)
    }

    pub fn from_mat(m: &Mat<c64>) -> Result<Self> {
        let d = m.nrows();
        if m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: m.ncols() });
        }
        DensityOperator::new(d, (0..d * d).map(|k| m[(k / d, k % d)]).collect())
    }

    pub fn to_mat(&self) -> Mat<c64> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.data[i * self.dim + j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[c64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// `max |rho - rho^dagger|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d = self.dim;
        let h = Mat::from_fn(d, d, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5);
        let evd = h
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Linalg(format!("hermitian eigensolve: {e:?}")))?;
        let s = evd.S().column_vector();
        Ok((0..d).map(|k| s[k].re).fold(f64::INFINITY, f64::min))
    }

    pub fn max_abs_diff(&self, other: &DensityOperator) -> f64 {
        linalg::max_abs_diff(&self.data, &other.data)
    }

    /// Sum of entrywise moduli of `self - other`.
    pub fn l1_diff(&self, other: &DensityOperator) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).sum()
    }

    /// `<phi| rho |psi>`.
    pub fn sandwich(&self, phi: &[c64], psi: &[c64]) -> c64 {
        let d = self.dim;
        (0..d)
            .map(|i| {
                let row = &self.data[i * d..(i + 1) * d];
                let r: c64 = row.iter().zip(psi).map(|(a, b)| a * b).sum();
                phi[i].conj() * r
            })
            .sum()
    }

    /// `rho |psi>`.
    pub fn apply(&self, psi: &[c64]) -> Vec<c64> {
        let d = self.dim;
        self.data.chunks_exact(d).map(|row| row.iter().zip(psi).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn position_marginal(&self, spec: &LatticeSpec) -> Result<PositionDistribution> {
        position_marginal(spec, self)
    }
}

/// Normalized pure state in the `position (x) coin` basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<c64>,
}

impl StateVector {
    pub fn new(amps: Vec<c64>) -> Result<Self> {
        let n = linalg::norm(&amps);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("norm {n} != 1")));
        }
        Ok(StateVector { amps })
    }

    /// Scales `amps` to unit norm.
    pub fn normalized(mut amps: Vec<c64>) -> Result<Self> {
        let n = linalg::norm(&amps);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("zero vector".into()));
        }
        amps.iter_mut().for_each(|z| *z /= n);
        Ok(StateVector { amps })
    }

    pub(crate) fn from_raw(amps: Vec<c64>) -> Self {
        StateVector { amps }
    }

    /// `|site> (x) coin`; `coin` must have unit norm.
    pub fn localized(spec: &LatticeSpec, site: Site, coin: [c64; 4]) -> Result<Self> {
        let mut amps = vec![ZERO; spec.dim()];
        let base = spec.basis_index(site, Direction::L)?;
        amps[base..base + 4].copy_from_slice(&coin);
        StateVector::new(amps)
    }

    pub fn basis(spec: &LatticeSpec, site: Site, c: Direction) -> Result<Self> {
        let mut amps = vec![ZERO; spec.dim()];
        amps[spec.basis_index(site, c)?] = linalg::ONE;
        Ok(StateVector { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<c64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amps)
    }

    pub fn position_marginal(&self, spec: &LatticeSpec) -> Result<PositionDistribution> {
        if self.dim() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), actual: self.dim() });
        }
        let probs = self.amps.chunks_exact(4).map(|b| b.iter().map(|z| z.norm_sqr()).sum()).collect();
        Ok(PositionDistribution { m: spec.m(), n: spec.n(), probs })
    }
}

/// `P(s, t)` stored in site-index order `s * N + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionDistribution {
    m: usize,
    n: usize,
    probs: Vec<f64>,
}

impl PositionDistribution {
    pub fn new(m: usize, n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != m * n {
            return Err(Error::DimensionMismatch { expected: m * n, actual: probs.len() });
        }
        Ok(PositionDistribution { m, n, probs })
    }

    pub fn uniform(m: usize, n: usize) -> Self {
        PositionDistribution { m, n, probs: vec![1.0 / (m * n) as f64; m * n] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.probs[s * self.n + t]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn l1_distance(&self, other: &PositionDistribution) -> f64 {
        assert_eq!((self.m, self.n), (other.m, other.n), "shape mismatch");
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn total_variation(&self, other: &PositionDistribution) -> f64 {
        0.5 * self.l1_distance(other)
    }

    pub fn max_abs_diff(&self, other: &PositionDistribution) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `P'(t, s) = P(s, t)`.
    pub fn transposed(&self) -> PositionDistribution {
        let mut probs = vec![0.0; self.probs.len()];
        for s in 0..self.m {
            for t in 0..self.n {
                probs[t * self.m + s] = self.get(s, t);
            }
        }
        PositionDistribution { m: self.n, n: self.m, probs }
    }

    /// Site with the largest probability (first in index order on ties).
    pub fn argmax(&self) -> Site {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = k;
            }
        }
        Site::new(best / self.n, best % self.n)
    }
}

pub fn position_marginal(spec: &LatticeSpec, rho: &DensityOperator) -> Result<PositionDistribution> {
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), actual: rho.dim() });
    }
    let probs = (0..spec.num_sites()).map(|k| (0..4).map(|c| rho.get(4 * k + c, 4 * k + c).re).sum()).collect();
    Ok(PositionDistribution { m: spec.m(), n: spec.n(), probs })
}

/// `Phi^steps(rho0)`.
pub fn evolve_exact(ch: &PercolationChannel, rho0: &DensityOperator, steps: usize) -> Result<DensityOperator> {
    if rho0.dim() != ch.dim() {
        return Err(Error::DimensionMismatch { expected: ch.dim(), actual: rho0.dim() });
    }
    let mut rho = rho0.clone();
    for _ in 0..steps {
        rho = ch.apply(&rho)?;
    }
    Ok(rho)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceOptions {
    /// Block length; should be a multiple of every attractor phase period.
    pub period: usize,
    /// Entrywise L1 distance between consecutive block ends.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions { period: 4, tol: 1e-10, max_steps: 100_000 }
    }
}

#[derive(Clone, Debug)]
pub struct Converged {
    pub rho: DensityOperator,
    pub steps: usize,
    pub converged: bool,
    pub last_change: f64,
}

/// Iterates the channel in blocks of `opts.period` steps until two
/// consecutive block ends agree to `opts.tol`.
pub fn evolve_until_converged(
    ch: &PercolationChannel,
    rho0: &DensityOperator,
    opts: ConvergenceOptions,
) -> Result<Converged> {
    if opts.period == 0 {
        return Err(Error::InvalidState("convergence period must be positive".into()));
    }
    let mut rho = rho0.clone();
    let mut steps = 0;
    let mut last_change = f64::INFINITY;
    while steps + opts.period <= opts.max_steps {
        let next = evolve_exact(ch, &rho, opts.period)?;
        steps += opts.period;
        last_change = next.l1_diff(&rho);
        rho = next;
        if last_change < opts.tol {
            return Ok(Converged { rho, steps, converged: true, last_change });
        }
    }
    Ok(Converged { rho, steps, converged: false, last_change })
}

/// `U_config^steps |psi0>`.
pub fn evolve_unitary(
    spec: &LatticeSpec,
    coin: &CoinOperator,
    config: &EdgeConfiguration,
    psi0: &StateVector,
    steps: usize,
) -> Result<StateVector> {
    if psi0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), actual: psi0.dim() });
    }
    if config.num_edges() != spec.num_edges() {
        return Err(Error::DimensionMismatch { expected: spec.num_edges(), actual: config.num_edges() });
    }
    let slots = crate::channel::SlotTable::new(spec);
    let u = StepUnitary::new(&slots, coin, config);
    let mut psi = psi0.amplitudes().to_vec();
    let mut next = vec![ZERO; psi.len()];
    for _ in 0..steps {
        u.apply_into(&psi, &mut next);
        std::mem::swap(&mut psi, &mut next);
    }
    Ok(StateVector::from_raw(psi))
}

/// Monte Carlo estimate of the position marginal with per-cell standard errors.
#[derive(Clone, Debug)]
pub struct McEstimate {
    pub mean: PositionDistribution,
    pub stderr: Vec<f64>,
    pub trials: usize,
}

impl McEstimate {
    /// `1/2 sum_m stderr_m`, the scale of the total-variation noise floor.
    pub fn tv_scale(&self) -> f64 {
        0.5 * self.stderr.iter().sum::<f64>()
    }
}

const MC_CHUNK: usize = 256;

/// Averages `|<m,c| U_{K_steps} ... U_{K_1} |psi0>|^2` over `trials`
/// trajectories. Trajectory `j` draws its step-`k` configuration from
/// substream `(j, k)` of `master_seed`, and partial sums are reduced in a
/// fixed order, so the result does not depend on the thread count.
pub fn evolve_mc(
    ch: &PercolationChannel,
    psi0: &StateVector,
    steps: usize,
    trials: usize,
    master_seed: u64,
) -> Result<McEstimate> {
    let spec = *ch.spec();
    if psi0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), actual: psi0.dim() });
    }
    if trials == 0 {
        return Err(Error::InvalidState("trials must be at least 1".into()));
    }
    let streams = Substreams::new(master_seed, &spec);
    let sites = spec.num_sites();
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..trials.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut sum = vec![0.0; sites];
            let mut sum_sq = vec![0.0; sites];
            let mut psi = vec![ZERO; spec.dim()];
            let mut next = vec![ZERO; spec.dim()];
            let end = ((chunk + 1) * MC_CHUNK).min(trials);
            for traj in chunk * MC_CHUNK..end {
                psi.copy_from_slice(psi0.amplitudes());
                for step in 0..steps {
                    let mut rng = streams.rng(traj as u64, step as u64);
                    let config = crate::channel::sample_config(ch.model(), &spec, &mut rng);
                    ch.step_unitary(&config).apply_into(&psi, &mut next);
                    std::mem::swap(&mut psi, &mut next);
                }
                for (k, block) in psi.chunks_exact(4).enumerate() {
                    let p: f64 = block.iter().map(|z| z.norm_sqr()).sum();
                    sum[k] += p;
                    sum_sq[k] += p * p;
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = vec![0.0; sites];
    let mut sum_sq = vec![0.0; sites];
    for (s, q) in &chunks {
        for k in 0..sites {
            sum[k] += s[k];
            sum_sq[k] += q[k];
        }
    }
    let n = trials as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr = if trials > 1 {
        mean.iter().zip(&sum_sq).map(|(m, q)| ((q - n * m * m).max(0.0) / (n - 1.0) / n).sqrt()).collect()
    } else {
        vec![0.0; sites]
    };
    Ok(McEstimate { mean: PositionDistribution { m: spec.m(), n: spec.n(), probs: mean }, stderr, trials })
}
