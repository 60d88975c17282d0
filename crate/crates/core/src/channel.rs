//! Percolation configurations, the configuration-dependent step unitaries and
//! the exact percolation channel.
//!
//! Every directed basis state `x = |m, c>` is moved by the shift operator as a
//! function of a single edge indicator: the edge crossed by the hop `m -> m (+) c`.
//! If the edge is present the walker hops to `|m (+) c, c>`, otherwise it is
//! reflected to `|m, ~c>`. Hops off an open boundary always reflect. Because
//! edges are independent, the average over all `2^|E|` configurations of
//! `U_K rho U_K^dagger` only ever needs joint statistics of at most two edges,
//! which is what [`PercolationChannel::apply`] exploits.

use faer::Mat;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coin::CoinOperator;
use crate::error::{Error, Result};
use crate::evolution::{DensityOperator, StateVector};
use crate::lattice::{Direction, Hop, LatticeSpec};
use crate::linalg::{self, c64, Mat4, ZERO};

/// Marker for "no edge" (an open-boundary wall) in slot tables.
const WALL: u32 = u32::MAX;

/// Per-basis-state transport data for a lattice.
#[derive(Clone, Debug)]
pub struct SlotTable {
    spec: LatticeSpec,
    /// Edge crossed by the hop out of `x`, or `WALL`.
    edge: Vec<u32>,
    /// Image of `x` when its edge is present (equals `reflect` at walls).
    step: Vec<usize>,
    /// Image of `x` when its edge is absent: `|m, ~c>`.
    reflect: Vec<usize>,
    /// For each target `a`: the state that hops into it (if any edge).
    hop_source: Vec<usize>,
    /// For each target `a`: the state that is reflected into it.
    bounce_source: Vec<usize>,
    /// Edge controlling both inflows of `a`, or `WALL`.
    inflow_edge: Vec<u32>,
}

impl SlotTable {
    pub fn new(spec: &LatticeSpec) -> Self {
        let d = spec.dim();
        let mut edge = vec![WALL; d];
        let mut step = vec![0; d];
        let mut reflect = vec![0; d];
        for site in spec.sites() {
            for c in Direction::ALL {
                let x = 4 * spec.site_index(site) + c.index();
                reflect[x] = 4 * spec.site_index(site) + c.reversed().index();
                match (spec.neighbor(site, c), spec.edge_of(site, c)) {
                    (Hop::To(next), Hop::To(e)) => {
                        edge[x] = spec.edge_index(e) as u32;
                        step[x] = 4 * spec.site_index(next) + c.index();
                    }
                    _ => step[x] = reflect[x],
                }
            }
        }
        let mut hop_source = vec![0; d];
        let mut bounce_source = vec![0; d];
        let mut inflow_edge = vec![WALL; d];
        for x in 0..d {
            bounce_source[reflect[x]] = x;
            if edge[x] != WALL {
                hop_source[step[x]] = x;
                inflow_edge[step[x]] = edge[x];
            } else {
                hop_source[reflect[x]] = x;
            }
        }
        SlotTable { spec: *spec, edge, step, reflect, hop_source, bounce_source, inflow_edge }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.edge.len()
    }

    pub fn edge(&self, x: usize) -> Option<usize> {
        (self.edge[x] != WALL).then_some(self.edge[x] as usize)
    }

    pub fn step_image(&self, x: usize) -> usize {
        self.step[x]
    }

    pub fn reflect_image(&self, x: usize) -> usize {
        self.reflect[x]
    }

    /// Image of `x` under `S_K`.
    pub fn image(&self, x: usize, config: &EdgeConfiguration) -> usize {
        match self.edge(x) {
            Some(e) if config.contains(e) => self.step[x],
            _ => self.reflect[x],
        }
    }

    /// Sources and weights feeding `a` under the averaged shift with
    /// presence probability `p`: `[(hop source, p), (bounce source, 1 - p)]`,
    /// or a single deterministic bounce at walls.
    fn inflow(&self, a: usize, p: f64) -> ([usize; 2], [f64; 2], u32) {
        let e = self.inflow_edge[a];
        if e == WALL {
            ([self.bounce_source[a], self.bounce_source[a]], [1.0, 0.0], WALL)
        } else {
            ([self.hop_source[a], self.bounce_source[a]], [p, 1.0 - p], e)
        }
    }
}

/// Membership bit per edge of a lattice.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeConfiguration {
    bits: Vec<u64>,
    num_edges: usize,
}

impl EdgeConfiguration {
    pub fn empty(spec: &LatticeSpec) -> Self {
        let num_edges = spec.num_edges();
        EdgeConfiguration { bits: vec![0; num_edges.div_ceil(64)], num_edges }
    }

    pub fn full(spec: &LatticeSpec) -> Self {
        let mut c = Self::empty(spec);
        for e in 0..c.num_edges {
            c.insert(e);
        }
        c
    }

    /// Configuration whose edge `e` is present iff bit `e` of `mask` is set.
    pub fn from_mask(spec: &LatticeSpec, mask: u64) -> Self {
        let mut c = Self::empty(spec);
        for e in 0..c.num_edges.min(64) {
            if mask >> e & 1 == 1 {
                c.insert(e);
            }
        }
        c
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn contains(&self, e: usize) -> bool {
        e < self.num_edges && self.bits[e / 64] >> (e % 64) & 1 == 1
    }

    pub fn insert(&mut self, e: usize) {
        assert!(e < self.num_edges, "edge {e} out of range");
        self.bits[e / 64] |= 1 << (e % 64);
    }

    pub fn remove(&mut self, e: usize) {
        if e < self.num_edges {
            self.bits[e / 64] &= !(1 << (e % 64));
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Independent bond percolation with presence probability `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PercolationModel {
    p: f64,
}

impl PercolationModel {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::InvalidProbability(p));
        }
        Ok(PercolationModel { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Draws a configuration, consuming exactly one `u64` per edge.
pub fn sample_config<R: RngCore + ?Sized>(
    model: PercolationModel,
    spec: &LatticeSpec,
    rng: &mut R,
) -> EdgeConfiguration {
    let mut config = EdgeConfiguration::empty(spec);
    for e in 0..config.num_edges {
        if unit_f64(rng.next_u64()) < model.p {
            config.insert(e);
        }
    }
    config
}

fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based random substreams derived from one master seed: stream
/// `trajectory`, positioned at a fixed offset per step, so each
/// `(trajectory, step)` pair sees the same numbers regardless of scheduling.
#[derive(Clone, Copy, Debug)]
pub struct Substreams {
    master: u64,
    words_per_step: u128,
}

impl Substreams {
    pub fn new(master: u64, spec: &LatticeSpec) -> Self {
        Substreams { master, words_per_step: 2 * spec.num_edges() as u128 }
    }

    pub fn rng(&self, trajectory: u64, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(trajectory);
        rng.set_word_pos(self.words_per_step * step as u128);
        rng
    }
}

/// `U_K = S_K (I (x) C)` for one configuration, stored as a permutation plus
/// the coin.
#[derive(Clone, Debug)]
pub struct StepUnitary {
    image: Vec<usize>,
    coin: Mat4,
}

impl StepUnitary {
    pub fn new(slots: &SlotTable, coin: &CoinOperator, config: &EdgeConfiguration) -> Self {
        let image = (0..slots.dim()).map(|x| slots.image(x, config)).collect();
        StepUnitary { image, coin: *coin.matrix() }
    }

    pub fn dim(&self) -> usize {
        self.image.len()
    }

    /// Image index of each basis state under the shift part.
    pub fn shift_images(&self) -> &[usize] {
        &self.image
    }

    pub fn apply(&self, psi: &[c64]) -> Vec<c64> {
        let mut out = vec![ZERO; psi.len()];
        self.apply_into(psi, &mut out);
        out
    }

    pub fn apply_into(&self, psi: &[c64], out: &mut [c64]) {
        for (site, block) in psi.chunks_exact(4).enumerate() {
            let v = self.coin.apply(&[block[0], block[1], block[2], block[3]]);
            for (c, z) in v.into_iter().enumerate() {
                out[self.image[4 * site + c]] = z;
            }
        }
    }

    pub fn shift_dense(&self) -> Mat<c64> {
        let d = self.dim();
        let mut s = Mat::<c64>::zeros(d, d);
        for (x, &y) in self.image.iter().enumerate() {
            s[(y, x)] = linalg::ONE;
        }
        s
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let d = self.dim();
        let mut u = Mat::<c64>::zeros(d, d);
        for (x, &y) in self.image.iter().enumerate() {
            let (site, c) = (x / 4, x % 4);
            for k in 0..4 {
                u[(y, 4 * site + k)] = self.coin.get(c, k);
            }
        }
        u
    }

    /// `U X` for a dense `X`.
    pub fn left_mul(&self, x: &Mat<c64>) -> Mat<c64> {
        let d = self.dim();
        let mut out = Mat::<c64>::zeros(d, x.ncols());
        for j in 0..x.ncols() {
            for site in 0..d / 4 {
                let v = [x[(4 * site, j)], x[(4 * site + 1, j)], x[(4 * site + 2, j)], x[(4 * site + 3, j)]];
                let w = self.coin.apply(&v);
                for c in 0..4 {
                    out[(self.image[4 * site + c], j)] = w[c];
                }
            }
        }
        out
    }

    /// `X U` for a dense `X`.
    pub fn right_mul(&self, x: &Mat<c64>) -> Mat<c64> {
        let d = self.dim();
        let mut out = Mat::<c64>::zeros(x.nrows(), d);
        for i in 0..x.nrows() {
            for site in 0..d / 4 {
                // (X S)[i][x] = X[i][image x], then right-multiply the block by C
                let y: [c64; 4] = std::array::from_fn(|c| x[(i, self.image[4 * site + c])]);
                for c in 0..4 {
                    out[(i, 4 * site + c)] = (0..4).map(|k| y[k] * self.coin.get(k, c)).sum();
                }
            }
        }
        out
    }
}

/// The percolation channel `rho -> sum_K pi_K(p) U_K rho U_K^dagger`.
#[derive(Clone, Debug)]
pub struct PercolationChannel {
    spec: LatticeSpec,
    coin: CoinOperator,
    model: PercolationModel,
    slots: SlotTable,
}

impl PercolationChannel {
    pub fn new(spec: LatticeSpec, coin: CoinOperator, model: PercolationModel) -> Self {
        let slots = SlotTable::new(&spec);
        PercolationChannel { spec, coin, model, slots }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn coin(&self) -> &CoinOperator {
        &self.coin
    }

    pub fn model(&self) -> PercolationModel {
        self.model
    }

    pub fn p(&self) -> f64 {
        self.model.p
    }

    pub fn slots(&self) -> &SlotTable {
        &self.slots
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// The same walk with a different presence probability.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Ok(PercolationChannel { model: PercolationModel::new(p)?, ..self.clone() })
    }

    pub fn step_unitary(&self, config: &EdgeConfiguration) -> StepUnitary {
        StepUnitary::new(&self.slots, &self.coin, config)
    }

    /// `{full} + {full minus one edge, for every edge} + {empty}`.
    pub fn generator_configs(&self) -> Vec<EdgeConfiguration> {
        let full = EdgeConfiguration::full(&self.spec);
        let mut out = vec![full.clone()];
        for e in 0..self.spec.num_edges() {
            let mut c = full.clone();
            c.remove(e);
            out.push(c);
        }
        out.push(EdgeConfiguration::empty(&self.spec));
        out
    }

    /// Exact channel application in `O(d^2)`.
    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let d = self.dim();
        if rho.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: rho.dim() });
        }
        let sigma = conjugate_by_local(rho.data(), d, self.coin.matrix());
        let p = self.model.p;
        let inflows: Vec<_> = (0..d).map(|a| self.slots.inflow(a, p)).collect();
        let mut out = vec![ZERO; d * d];
        out.par_chunks_mut(d).enumerate().for_each(|(a, row)| {
            let (sa, wa, ea) = inflows[a];
            let r0 = &sigma[sa[0] * d..(sa[0] + 1) * d];
            let r1 = &sigma[sa[1] * d..(sa[1] + 1) * d];
            for (b, slot) in row.iter_mut().enumerate() {
                let (sb, wb, eb) = inflows[b];
                *slot = if ea != WALL && ea == eb {
                    // one shared edge: both hop or both bounce
                    r0[sb[0]] * p + r1[sb[1]] * (1.0 - p)
                } else {
                    let mut acc = ZERO;
                    for (r, w) in [(r0, wa[0]), (r1, wa[1])] {
                        if w == 0.0 {
                            continue;
                        }
                        for k in 0..2 {
                            if wb[k] != 0.0 {
                                acc += r[sb[k]] * (w * wb[k]);
                            }
                        }
                    }
                    acc
                };
            }
        });
        Ok(DensityOperator::from_raw(d, out))
    }

    /// The averaged single-step operator `B = E[S_K] (I (x) C)`.
    pub fn averaged_step(&self) -> AveragedStep {
        AveragedStep { slots: self.slots.clone(), coin: *self.coin.matrix(), p: self.model.p }
    }
}

/// Largest edge count accepted by [`apply_by_enumeration`].
pub const ENUMERATION_MAX_EDGES: usize = 16;

/// `sum_K pi_K(p) U_K rho U_K^dagger` summed literally over all `2^|E|`
/// configurations. Reference implementation for small lattices.
pub fn apply_by_enumeration(ch: &PercolationChannel, rho: &DensityOperator) -> Result<DensityOperator> {
    let d = ch.dim();
    if rho.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: rho.dim() });
    }
    let edges = ch.spec().num_edges();
    if edges > ENUMERATION_MAX_EDGES {
        return Err(Error::Guard { guard: "configuration enumeration", dim: edges, limit: ENUMERATION_MAX_EDGES });
    }
    let p = ch.p();
    let r = rho.to_mat();
    let mut acc = Mat::<c64>::zeros(d, d);
    for mask in 0..1u64 << edges {
        let present = mask.count_ones() as i32;
        let weight = p.powi(present) * (1.0 - p).powi(edges as i32 - present);
        if weight == 0.0 {
            continue;
        }
        let u = ch.step_unitary(&EdgeConfiguration::from_mask(ch.spec(), mask));
        let ur = u.left_mul(&r);
        // (U rho U^dagger) = (U (U rho)^dagger)^dagger
        let urud = u.left_mul(&ur.adjoint().to_owned()).adjoint().to_owned();
        for j in 0..d {
            for i in 0..d {
                acc[(i, j)] += urud[(i, j)] * weight;
            }
        }
    }
    Ok(DensityOperator::from_raw(d, (0..d * d).map(|k| acc[(k / d, k % d)]).collect()))
}

/// `(I (x) C) rho (I (x) C)^dagger` on a row-major `d x d` buffer.
pub(crate) fn conjugate_by_local(rho: &[c64], d: usize, coin: &Mat4) -> Vec<c64> {
    let mut tmp = vec![ZERO; d * d];
    // left: block rows
    for site in 0..d / 4 {
        for j in 0..d {
            let v: [c64; 4] = std::array::from_fn(|c| rho[(4 * site + c) * d + j]);
            let w = coin.apply(&v);
            for c in 0..4 {
                tmp[(4 * site + c) * d + j] = w[c];
            }
        }
    }
    // right: block columns with C^dagger
    let mut out = vec![ZERO; d * d];
    for i in 0..d {
        let row = &tmp[i * d..(i + 1) * d];
        let dst = &mut out[i * d..(i + 1) * d];
        for site in 0..d / 4 {
            let y = &row[4 * site..4 * site + 4];
            for c in 0..4 {
                dst[4 * site + c] = (0..4).map(|k| y[k] * coin.get(c, k).conj()).sum();
            }
        }
    }
    out
}

/// `B = sum_K pi_K(p) U_K`, kept factored as `E[S_K] (I (x) C)` where
/// `E[S_K] |m, c> = p |m (+) c, c> + (1 - p) |m, ~c>` (`p -> 0` at walls).
#[derive(Clone, Debug)]
pub struct AveragedStep {
    slots: SlotTable,
    coin: Mat4,
    p: f64,
}

impl AveragedStep {
    pub fn dim(&self) -> usize {
        self.slots.dim()
    }

    pub fn apply(&self, psi: &[c64]) -> Vec<c64> {
        let d = self.dim();
        let mut coined = vec![ZERO; d];
        for (site, block) in psi.chunks_exact(4).enumerate() {
            let v = self.coin.apply(&[block[0], block[1], block[2], block[3]]);
            coined[4 * site..4 * site + 4].copy_from_slice(&v);
        }
        (0..d)
            .map(|a| {
                let (src, w, _) = self.slots.inflow(a, self.p);
                coined[src[0]] * w[0] + coined[src[1]] * w[1]
            })
            .collect()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let d = self.dim();
        let mut b = Mat::<c64>::zeros(d, d);
        for a in 0..d {
            let (src, w, _) = self.slots.inflow(a, self.p);
            for k in 0..2 {
                if w[k] == 0.0 {
                    continue;
                }
                let (site, c) = (src[k] / 4, src[k] % 4);
                for j in 0..4 {
                    b[(a, 4 * site + j)] += self.coin.get(c, j) * w[k];
                }
            }
        }
        b
    }

    /// All eigenvalues of `B` (dense eigensolve).
    pub fn spectrum(&self) -> Result<Vec<c64>> {
        linalg::eigenvalues(&self.to_dense())
    }
}

impl StateVector {
    /// One step with configuration-dependent unitary.
    pub fn stepped(&self, u: &StepUnitary) -> StateVector {
        StateVector::from_raw(u.apply(self.amplitudes()))
    }
}
