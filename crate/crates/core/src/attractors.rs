//! Attractor spaces and asymptotic states.
//!
//! An attractor is an operator `X` with `X U_K = lambda U_K X` for every
//! configuration `K` and `|lambda| = 1`. Since `U_K X U_K^dagger = conj(lambda) X`,
//! the channel multiplies the `X` component of a state by `conj(lambda)` each
//! step, so
//!
//! ```text
//! rho_as(t) = sum_k conj(lambda_k)^t X_k Tr(rho0 X_k^dagger)
//! ```
//!
//! for any Hilbert-Schmidt orthonormal attractor basis `{X_k}`.
//!
//! Common eigenstates `U_K |phi> = alpha |phi>` give the outer-product
//! attractors `|phi_a><phi_b|` with `lambda = conj(alpha_a) alpha_b`; together
//! with the identity they span the minimal attractor space. For small
//! lattices [`general_attractor_basis`] solves the attractor equations
//! directly and certifies that nothing else exists.

use std::fmt;

use faer::Mat;
use serde_json::{json, Value};

use crate::analytic;
use crate::channel::{EdgeConfiguration, PercolationChannel, StepUnitary};
use crate::coin::{rc_eigenspaces, rc_spectrum, CoinKind};
use crate::error::{Error, Result};
use crate::evolution::{DensityOperator, PositionDistribution, StateVector};
use crate::lattice::{Boundary, LatticeSpec};
use crate::linalg::{self, c64, ONE, ZERO};

/// Largest Hilbert dimension for dense eigen-solves and dense asymptotic states.
pub const DENSE_GUARD: usize = 4096;
/// Largest Hilbert dimension for the direct attractor solve.
pub const GENERAL_GUARD: usize = 80;
/// `||U_K phi - alpha phi||` allowed for a common eigenstate.
pub const EIGEN_TOL: f64 = 1e-10;
/// `||X U_K - lambda U_K X||_max` allowed for an attractor.
pub const ATTRACTOR_TOL: f64 = 1e-8;
/// Singular values of `B - alpha I` counted as zero.
pub const NULL_TOL: f64 = 1e-8;
/// Relative rank cut-off when orthonormalizing eigenstate families.
pub const RANK_TOL: f64 = 1e-9;
const GRAM_TOL: f64 = 1e-10;
const CLASS_NULL_TOL: f64 = 1e-9;

fn require_interior_p(ch: &PercolationChannel, what: &'static str) -> Result<()> {
    let p = ch.p();
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::DegenerateProbability { what, p });
    }
    Ok(())
}

fn guard(what: &'static str, dim: usize, limit: usize) -> Result<()> {
    if dim > limit {
        return Err(Error::Guard { guard: what, dim, limit });
    }
    Ok(())
}

/// A normalized simultaneous eigenvector of every step unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct CommonEigenstate {
    alpha: c64,
    index: usize,
    label: String,
    vector: Vec<c64>,
}

impl CommonEigenstate {
    pub fn new(alpha: c64, index: usize, label: impl Into<String>, vector: Vec<c64>) -> Self {
        CommonEigenstate { alpha, index, label: label.into(), vector }
    }

    pub fn alpha(&self) -> c64 {
        self.alpha
    }

    /// Degeneracy index within the `alpha` eigenspace.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn vector(&self) -> &[c64] {
        &self.vector
    }

    pub fn to_state(&self) -> Result<StateVector> {
        StateVector::normalized(self.vector.clone())
    }
}

/// `||U phi - alpha phi||`.
pub fn eigen_residual(u: &StepUnitary, phi: &[c64], alpha: c64) -> f64 {
    let up = u.apply(phi);
    up.iter().zip(phi).map(|(a, b)| (a - alpha * b).norm_sqr()).sum::<f64>().sqrt()
}

/// Worst eigen-residual of `phi` over `configs`.
pub fn verify_common_eigenstate(
    ch: &PercolationChannel,
    phi: &[c64],
    alpha: c64,
    configs: &[EdgeConfiguration],
) -> f64 {
    configs.iter().map(|k| eigen_residual(&ch.step_unitary(k), phi, alpha)).fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct RejectedState {
    pub alpha: c64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct NumericEigenstates {
    pub states: Vec<CommonEigenstate>,
    pub rejected: Vec<RejectedState>,
}

/// Common eigenstates as the unit-modulus eigenvectors of the averaged step
/// `B`. Every common eigenstate is an eigenvector of `I (x) RC` (the
/// all-edges-broken unitary), so the candidate eigenvalues are the
/// eigenvalues of `RC`, and each eigenspace is the null space of `B - alpha`.
/// Candidates are re-verified on the generator configurations.
pub fn find_common_eigenstates_numeric(ch: &PercolationChannel) -> Result<NumericEigenstates> {
    require_interior_p(ch, "common eigenstate search")?;
    guard("dense eigensolve", ch.dim(), DENSE_GUARD)?;
    let d = ch.dim();
    let b = ch.averaged_step().to_dense();
    let configs = ch.generator_configs();
    let mut states = Vec::new();
    let mut rejected = Vec::new();
    for space in rc_eigenspaces(ch.coin())? {
        let alpha = space.alpha;
        let shifted = Mat::from_fn(d, d, |i, j| if i == j { b[(i, j)] - alpha } else { b[(i, j)] });
        let null = linalg::null_space(&shifted, NULL_TOL)?;
        let (null, _) = linalg::orthonormalize(&null, RANK_TOL);
        let mut index = 0;
        for mut v in null {
            linalg::fix_phase(&mut v, 1e-8);
            let residual = verify_common_eigenstate(ch, &v, alpha, &configs);
            if residual <= EIGEN_TOL {
                states.push(CommonEigenstate::new(alpha, index, format!("numeric[{index}]"), v));
                index += 1;
            } else {
                rejected.push(RejectedState { alpha, residual });
            }
        }
    }
    Ok(NumericEigenstates { states, rejected })
}

/// `|phi_left><phi_right|` with its measured superoperator eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PAttractor {
    pub lambda: c64,
    pub left: usize,
    pub right: usize,
    /// Upper bound on `||X U_full - lambda U_full X||_max`.
    pub residual: f64,
}

/// All `n^2` outer products of `states`, with `lambda` measured against the
/// full-configuration unitary and the output sorted by the phase of `lambda`.
pub fn p_attractor_basis(states: &[CommonEigenstate], ch: &PercolationChannel) -> Vec<PAttractor> {
    let u = ch.step_unitary(&EdgeConfiguration::full(ch.spec()));
    let measured: Vec<(c64, f64)> = states
        .iter()
        .map(|s| {
            let v = s.vector();
            let a = linalg::dot(v, &u.apply(v));
            (a, eigen_residual(&u, v, a))
        })
        .collect();
    let mut out = Vec::with_capacity(states.len() * states.len());
    for (left, &(aa, ra)) in measured.iter().enumerate() {
        for (right, &(ab, rb)) in measured.iter().enumerate() {
            // X U = alpha_b X and U X = alpha_a X
            let lambda = aa.conj() * ab;
            let residual = ra + rb + (ab - lambda * aa).norm();
            out.push(PAttractor { lambda, left, right, residual });
        }
    }
    out.sort_by(|x, y| {
        let (px, py) = (phase_key(x.lambda), phase_key(y.lambda));
        px.cmp(&py).then((x.left, x.right).cmp(&(y.left, y.right)))
    });
    out
}

fn phase_key(z: c64) -> i64 {
    // 1e-9 phase buckets with 2 pi folded onto 0
    let p = linalg::phase_0_2pi(z);
    let k = (p * 1e9).round() as i64;
    if k >= (2.0 * std::f64::consts::PI * 1e9).round() as i64 {
        0
    } else {
        k
    }
}

/// How the attractor form of a basis element is stored.
#[derive(Clone, Debug, PartialEq)]
pub enum AttractorForm {
    /// `|phi_left><phi_right|` referencing the basis' eigenstates.
    Outer { left: usize, right: usize },
    /// `(I - P) / sqrt(d - n)` where `P` projects on all eigenstates.
    Complement,
    /// Row-major dense matrix.
    Dense(Vec<c64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Attractor {
    pub lambda: c64,
    pub form: AttractorForm,
}

/// How much is known about whether a basis spans the whole attractor space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Completeness {
    /// Dimension equals that of a direct solve of the attractor equations.
    Certified,
    /// Coin with a closed-form treatment proving the minimal space is complete.
    Analytic,
    /// Minimal space only; nothing further is known.
    AssumedMinimal,
}

impl Completeness {
    pub fn as_str(self) -> &'static str {
        match self {
            Completeness::Certified => "certified",
            Completeness::Analytic => "analytic",
            Completeness::AssumedMinimal => "assumed-minimal",
        }
    }

    pub fn allows_fastpath(self) -> bool {
        matches!(self, Completeness::Certified | Completeness::Analytic)
    }
}

impl fmt::Display for Completeness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hilbert-Schmidt orthonormal attractor basis.
#[derive(Clone, Debug)]
pub struct AttractorBasis {
    spec: LatticeSpec,
    coin_kind: CoinKind,
    states: Vec<CommonEigenstate>,
    attractors: Vec<Attractor>,
    completeness: Completeness,
}

impl AttractorBasis {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn coin_kind(&self) -> CoinKind {
        self.coin_kind
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn states(&self) -> &[CommonEigenstate] {
        &self.states
    }

    pub fn attractors(&self) -> &[Attractor] {
        &self.attractors
    }

    /// Number of attractors.
    pub fn len(&self) -> usize {
        self.attractors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attractors.is_empty()
    }

    pub fn completeness(&self) -> Completeness {
        self.completeness
    }

    pub fn lambdas(&self) -> Vec<c64> {
        self.attractors.iter().map(|a| a.lambda).collect()
    }

    /// Dense matrix of attractor `k`.
    pub fn dense(&self, k: usize) -> Mat<c64> {
        let d = self.dim();
        match &self.attractors[k].form {
            AttractorForm::Outer { left, right } => {
                let (a, b) = (self.states[*left].vector(), self.states[*right].vector());
                Mat::from_fn(d, d, |i, j| a[i] * b[j].conj())
            }
            AttractorForm::Complement => {
                let scale = 1.0 / ((d - self.states.len()) as f64).sqrt();
                let p = self.projector();
                Mat::from_fn(d, d, |i, j| {
                    let id = if i == j { ONE } else { ZERO };
                    (id - p[(i, j)]) * scale
                })
            }
            AttractorForm::Dense(x) => Mat::from_fn(d, d, |i, j| x[i * d + j]),
        }
    }

    /// `P = sum_a |phi_a><phi_a|`.
    pub fn projector(&self) -> Mat<c64> {
        projector(&self.states, self.dim())
    }

    /// Hilbert-Schmidt Gram matrix `Tr(X_i^dagger X_j)` (dense; small lattices).
    pub fn gram(&self) -> Mat<c64> {
        let dense: Vec<Mat<c64>> = (0..self.len()).map(|k| self.dense(k)).collect();
        let k = dense.len();
        Mat::from_fn(k, k, |i, j| hs_inner(&dense[i], &dense[j]))
    }

    /// Worst `||X U_K - lambda U_K X||_max` over `configs` (dense; small lattices).
    pub fn attractor_residual(&self, ch: &PercolationChannel, configs: &[EdgeConfiguration]) -> f64 {
        let units: Vec<StepUnitary> = configs.iter().map(|k| ch.step_unitary(k)).collect();
        (0..self.len())
            .map(|k| attractor_residual(&self.dense(k), self.attractors[k].lambda, &units))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        let pair = |z: c64| json!([z.re, z.im]);
        let attractors: Vec<Value> = self
            .attractors
            .iter()
            .map(|a| match &a.form {
                AttractorForm::Outer { left, right } => {
                    json!({"lambda": pair(a.lambda), "form": "outer", "left": left, "right": right})
                }
                AttractorForm::Complement => json!({"lambda": pair(a.lambda), "form": "complement"}),
                AttractorForm::Dense(x) => json!({
                    "lambda": pair(a.lambda),
                    "form": "dense",
                    "matrix": x.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
                }),
            })
            .collect();
        let states: Vec<Value> = self
            .states
            .iter()
            .map(|s| {
                json!({
                    "alpha": pair(s.alpha()),
                    "label": s.label(),
                    "amplitudes": s.vector().iter().map(|z| pair(*z)).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "schema": 1,
            "lattice": self.spec.to_spec_string(),
            "coin": self.coin_kind.as_str(),
            "completeness": self.completeness.as_str(),
            "dimension": self.len(),
            "states": states,
            "attractors": attractors,
        })
    }
}

fn projector(states: &[CommonEigenstate], d: usize) -> Mat<c64> {
    let mut p = Mat::<c64>::zeros(d, d);
    for s in states {
        let v = s.vector();
        for i in 0..d {
            if v[i] == ZERO {
                continue;
            }
            for j in 0..d {
                p[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    p
}

fn hs_inner(a: &Mat<c64>, b: &Mat<c64>) -> c64 {
    let mut acc = ZERO;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}

fn attractor_residual(x: &Mat<c64>, lambda: c64, units: &[StepUnitary]) -> f64 {
    units
        .iter()
        .map(|u| {
            let xu = u.right_mul(x);
            let ux = u.left_mul(x);
            let mut worst = 0.0f64;
            for j in 0..x.ncols() {
                for i in 0..x.nrows() {
                    worst = worst.max((xu[(i, j)] - lambda * ux[(i, j)]).norm());
                }
            }
            worst
        })
        .fold(0.0, f64::max)
}

fn check_orthonormal(states: &[CommonEigenstate]) -> Result<()> {
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate().skip(i) {
            let expect = if i == j { ONE } else { ZERO };
            let g = linalg::dot(a.vector(), b.vector());
            if (g - expect).norm() > GRAM_TOL {
                return Err(Error::Verification(format!("eigenstates {i}, {j} not orthonormal (<a|b> = {g})")));
            }
        }
    }
    Ok(())
}

/// The minimal attractor space (p-attractors plus the identity), with its
/// completeness established as far as possible: by a direct solve when the
/// lattice is within [`GENERAL_GUARD`], by the coin's closed-form analysis
/// for the three named coins, otherwise only assumed.
pub fn complete_basis(states: Vec<CommonEigenstate>, ch: &PercolationChannel) -> Result<AttractorBasis> {
    let completeness = if ch.dim() <= GENERAL_GUARD {
        let general = general_attractor_dimension(ch)?;
        let minimal = minimal_dimension(states.len(), ch.dim());
        if general != minimal {
            return Err(Error::Certification(format!(
                "attractor space has dimension {general}, minimal subspace has {minimal}"
            )));
        }
        Completeness::Certified
    } else if ch.coin().kind().is_analyzed() {
        Completeness::Analytic
    } else {
        Completeness::AssumedMinimal
    };
    minimal_basis(states, ch, completeness)
}

/// The minimal attractor space with a caller-supplied completeness label.
pub fn minimal_basis(
    states: Vec<CommonEigenstate>,
    ch: &PercolationChannel,
    completeness: Completeness,
) -> Result<AttractorBasis> {
    check_orthonormal(&states)?;
    let d = ch.dim();
    for s in &states {
        if s.vector().len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: s.vector().len() });
        }
    }
    let mut attractors: Vec<Attractor> = p_attractor_basis(&states, ch)
        .into_iter()
        .map(|pa| Attractor { lambda: pa.lambda, form: AttractorForm::Outer { left: pa.left, right: pa.right } })
        .collect();
    if states.len() < d {
        attractors.push(Attractor { lambda: ONE, form: AttractorForm::Complement });
    }
    Ok(AttractorBasis { spec: *ch.spec(), coin_kind: ch.coin().kind(), states, attractors, completeness })
}

fn minimal_dimension(n: usize, d: usize) -> usize {
    n * n + usize::from(n < d)
}

/// Where common eigenstates come from when building a basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateSource {
    /// Closed forms for the named coins, numeric otherwise.
    Auto,
    Numeric,
    Analytic,
}

/// Common eigenstates for `ch` from the requested source.
pub fn common_eigenstates(ch: &PercolationChannel, source: StateSource) -> Result<Vec<CommonEigenstate>> {
    require_interior_p(ch, "attractor construction")?;
    let analytic = match source {
        StateSource::Numeric => false,
        StateSource::Analytic => true,
        StateSource::Auto => ch.coin().kind().is_analyzed(),
    };
    if analytic {
        analytic::states(ch.spec(), ch.coin())
    } else {
        Ok(find_common_eigenstates_numeric(ch)?.states)
    }
}

/// Eigenstates from `source`, then [`complete_basis`].
pub fn build_basis(ch: &PercolationChannel, source: StateSource) -> Result<AttractorBasis> {
    let states = common_eigenstates(ch, source)?;
    complete_basis(states, ch)
}

/// Union-find over the `d^2` matrix positions. Two positions share a class
/// when some `(x, y)` is sent to both by `S_K (.) S_K^dagger` for different
/// configurations, so `S_K^dagger X S_K` is configuration independent exactly
/// for matrices constant on classes.
struct ShiftClasses {
    class_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ShiftClasses {
    fn new(ch: &PercolationChannel) -> Self {
        let slots = ch.slots();
        let d = slots.dim();
        let mut parent: Vec<usize> = (0..d * d).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        let images = |x: usize| -> Vec<usize> {
            match slots.edge(x) {
                Some(_) => vec![slots.step_image(x), slots.reflect_image(x)],
                None => vec![slots.reflect_image(x)],
            }
        };
        for x in 0..d {
            let ix = images(x);
            for y in 0..d {
                let pairs: Vec<(usize, usize)> = match (slots.edge(x), slots.edge(y)) {
                    (Some(ex), Some(ey)) if ex == ey => {
                        vec![
                            (slots.step_image(x), slots.step_image(y)),
                            (slots.reflect_image(x), slots.reflect_image(y)),
                        ]
                    }
                    _ => {
                        let iy = images(y);
                        ix.iter().flat_map(|&a| iy.iter().map(move |&b| (a, b))).collect()
                    }
                };
                let (a0, b0) = pairs[0];
                for &(a, b) in &pairs[1..] {
                    let r1 = find(&mut parent, a0 * d + b0);
                    let r2 = find(&mut parent, a * d + b);
                    if r1 != r2 {
                        parent[r1] = r2;
                    }
                }
            }
        }
        let mut root_class = vec![usize::MAX; d * d];
        let mut class_of = vec![0; d * d];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (pos, class) in class_of.iter_mut().enumerate() {
            let r = find(&mut parent, pos);
            if root_class[r] == usize::MAX {
                root_class[r] = members.len();
                members.push(Vec::new());
            }
            *class = root_class[r];
            members[root_class[r]].push(pos);
        }
        ShiftClasses { class_of, members }
    }

    fn len(&self) -> usize {
        self.members.len()
    }

    /// `K = Q^dagger L Q` with `Q` the normalized class indicators and
    /// `L(X) = (I (x) RC) X (I (x) RC)^dagger`.
    fn local_map(&self, ch: &PercolationChannel, d: usize) -> Mat<c64> {
        let rc = ch.coin().reflected();
        let k = self.len();
        let norms: Vec<f64> = self.members.iter().map(|m| 1.0 / (m.len() as f64).sqrt()).collect();
        let mut out = Mat::<c64>::zeros(k, k);
        for (j, members) in self.members.iter().enumerate() {
            for &pos in members {
                let (x, y) = (pos / d, pos % d);
                let (bx, by) = (x / 4 * 4, y / 4 * 4);
                for a in 0..4 {
                    let ta = rc.get(a, x % 4);
                    if ta == ZERO {
                        continue;
                    }
                    for b in 0..4 {
                        let tb = rc.get(b, y % 4).conj();
                        let target = self.class_of[(bx + a) * d + by + b];
                        out[(target, j)] += ta * tb * (norms[j] * norms[target]);
                    }
                }
            }
        }
        out
    }
}

/// Candidate superoperator eigenvalues `alpha_a conj(alpha_b)` over the
/// spectrum of `RC`, deduplicated.
fn candidate_mus(ch: &PercolationChannel) -> Result<Vec<c64>> {
    let spectrum = rc_spectrum(ch.coin())?;
    let mut mus: Vec<c64> = Vec::new();
    for a in &spectrum {
        for b in &spectrum {
            let mu = a.alpha * b.alpha.conj();
            if mus.iter().all(|m| (m - mu).norm() > 1e-9) {
                mus.push(mu);
            }
        }
    }
    Ok(mus)
}

fn class_system(mu: c64, k_map: &Mat<c64>) -> Mat<c64> {
    // 2 - conj(mu) K - mu K^dagger: PSD, null exactly where K c = mu c
    let k = k_map.nrows();
    let w = mu.conj();
    Mat::from_fn(k, k, |i, j| {
        let id = if i == j { c64::new(2.0, 0.0) } else { ZERO };
        id - w * k_map[(i, j)] - (w * k_map[(j, i)]).conj()
    })
}

/// Dimension of the attractor space by a direct solve, without building the
/// basis.
pub fn general_attractor_dimension(ch: &PercolationChannel) -> Result<usize> {
    require_interior_p(ch, "direct attractor solve")?;
    guard("general attractor solver", ch.dim(), GENERAL_GUARD)?;
    let d = ch.dim();
    let classes = ShiftClasses::new(ch);
    let k_map = classes.local_map(ch, d);
    let mut total = 0;
    for mu in candidate_mus(ch)? {
        let g = class_system(mu, &k_map);
        let evals = g
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Linalg(format!("hermitian eigenvalues: {e:?}")))?;
        total += evals.iter().filter(|&&v| v < CLASS_NULL_TOL).count();
    }
    Ok(total)
}

/// Attractor basis from the attractor equations themselves.
///
/// Shift conditions restrict `X` to matrices constant on [`ShiftClasses`];
/// the remaining local condition is `(I (x) RC) X (I (x) RC)^dagger = conj(lambda) X`.
/// Each candidate eigenvalue is solved as a Hermitian null-space problem on
/// the class coefficients, and every solution is verified against the
/// generator configurations.
pub fn general_attractor_basis(ch: &PercolationChannel) -> Result<AttractorBasis> {
    require_interior_p(ch, "direct attractor solve")?;
    guard("general attractor solver", ch.dim(), GENERAL_GUARD)?;
    let d = ch.dim();
    let classes = ShiftClasses::new(ch);
    let k_map = classes.local_map(ch, d);
    let units: Vec<StepUnitary> = ch.generator_configs().iter().map(|k| ch.step_unitary(k)).collect();
    let mut attractors = Vec::new();
    for mu in candidate_mus(ch)? {
        let g = class_system(mu, &k_map);
        let lambda = mu.conj();
        for c in linalg::hermitian_low_eigenvectors(&g, CLASS_NULL_TOL)? {
            let mut x = vec![ZERO; d * d];
            for (j, members) in classes.members.iter().enumerate() {
                let v = c[j] / (members.len() as f64).sqrt();
                for &pos in members {
                    x[pos] = v;
                }
            }
            let xm = Mat::from_fn(d, d, |i, j| x[i * d + j]);
            let residual = attractor_residual(&xm, lambda, &units);
            if residual > ATTRACTOR_TOL {
                return Err(Error::Verification(format!(
                    "direct attractor with lambda {lambda} has residual {residual:.3e}"
                )));
            }
            attractors.push(Attractor { lambda, form: AttractorForm::Dense(x) });
        }
    }
    Ok(AttractorBasis {
        spec: *ch.spec(),
        coin_kind: ch.coin().kind(),
        states: Vec::new(),
        attractors,
        completeness: Completeness::Certified,
    })
}

/// Projector onto the common eigenstates and its complement, for the
/// fast asymptotic formula.
#[derive(Clone, Debug)]
pub struct AsymptoticDecomposition {
    spec: LatticeSpec,
    states: Vec<CommonEigenstate>,
    completeness: Completeness,
}

impl AsymptoticDecomposition {
    pub fn from_basis(basis: &AttractorBasis) -> Self {
        AsymptoticDecomposition { spec: basis.spec, states: basis.states.clone(), completeness: basis.completeness }
    }

    pub fn rank(&self) -> usize {
        self.states.len()
    }

    /// `Tr(I - P) = d - rank(P)`.
    pub fn complement_trace(&self) -> usize {
        self.spec.dim() - self.rank()
    }

    pub fn completeness(&self) -> Completeness {
        self.completeness
    }

    pub fn projector(&self) -> Mat<c64> {
        projector(&self.states, self.spec.dim())
    }
}

/// `<phi_a| rho0 |phi_b>` for all pairs, plus `Tr(rho0 (I - P))`.
fn overlaps(states: &[CommonEigenstate], rho0: &Initial<'_>) -> (Vec<c64>, f64) {
    let n = states.len();
    let mut w = vec![ZERO; n * n];
    match rho0 {
        Initial::Pure(psi) => {
            let amps: Vec<c64> = states.iter().map(|s| linalg::dot(s.vector(), psi.amplitudes())).collect();
            for a in 0..n {
                for b in 0..n {
                    w[a * n + b] = amps[a] * amps[b].conj();
                }
            }
        }
        Initial::Mixed(rho) => {
            let images: Vec<Vec<c64>> = states.iter().map(|s| rho.apply(s.vector())).collect();
            for a in 0..n {
                for b in 0..n {
                    w[a * n + b] = linalg::dot(states[a].vector(), &images[b]);
                }
            }
        }
    }
    let total = match rho0 {
        Initial::Pure(psi) => psi.norm().powi(2),
        Initial::Mixed(rho) => rho.trace().re,
    };
    let inside: f64 = (0..n).map(|a| w[a * n + a].re).sum();
    (w, total - inside)
}

enum Initial<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityOperator),
}

impl Initial<'_> {
    fn dim(&self) -> usize {
        match self {
            Initial::Pure(p) => p.dim(),
            Initial::Mixed(r) => r.dim(),
        }
    }

    fn hs_overlap(&self, x: &[c64]) -> c64 {
        // Tr(rho0 X^dagger)
        match self {
            Initial::Pure(psi) => {
                let a = psi.amplitudes();
                let d = a.len();
                let mut acc = ZERO;
                for i in 0..d {
                    for j in 0..d {
                        acc += a[i] * a[j].conj() * x[i * d + j].conj();
                    }
                }
                acc
            }
            Initial::Mixed(rho) => rho.data().iter().zip(x).map(|(r, z)| r * z.conj()).sum(),
        }
    }
}

/// Per-term data for evaluating the asymptotic formula.
struct Coefficients {
    /// `conj(lambda)^t <phi_a|rho0|phi_b>` indexed `a * n + b`.
    outer: Vec<c64>,
    /// Weight multiplying `I - P`.
    complement: f64,
    /// `(conj(lambda)^t Tr(rho0 X^dagger), k)` for dense attractors.
    dense: Vec<(c64, usize)>,
}

fn coefficients(basis: &AttractorBasis, rho0: &Initial<'_>, t: u64) -> Result<Coefficients> {
    if rho0.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), actual: rho0.dim() });
    }
    check_orthonormal(&basis.states)?;
    let n = basis.states.len();
    let d = basis.dim();
    let (w, comp_trace) = overlaps(&basis.states, rho0);
    let mut outer = vec![ZERO; n * n];
    let mut complement = 0.0;
    let mut dense = Vec::new();
    for (k, a) in basis.attractors.iter().enumerate() {
        let phase = power(a.lambda.conj(), t);
        match &a.form {
            AttractorForm::Outer { left, right } => outer[left * n + right] += phase * w[left * n + right],
            AttractorForm::Complement => complement += comp_trace / (d - n) as f64,
            AttractorForm::Dense(x) => dense.push((phase * rho0.hs_overlap(x), k)),
        }
    }
    Ok(Coefficients { outer, complement, dense })
}

fn power(z: c64, t: u64) -> c64 {
    // unit-modulus power without drift in the modulus
    let r = z.norm();
    if r == 0.0 {
        return ZERO;
    }
    let angle = z.arg() * t as f64;
    c64::from_polar(r.powf(t as f64), angle)
}

fn dense_state(basis: &AttractorBasis, coef: &Coefficients) -> Mat<c64> {
    let d = basis.dim();
    let n = basis.states.len();
    let mut rho = Mat::<c64>::zeros(d, d);
    for a in 0..n {
        let va = basis.states[a].vector();
        for b in 0..n {
            let w = coef.outer[a * n + b];
            if w == ZERO {
                continue;
            }
            let vb = basis.states[b].vector();
            for i in 0..d {
                let left = w * va[i];
                for j in 0..d {
                    rho[(i, j)] += left * vb[j].conj();
                }
            }
        }
    }
    if coef.complement != 0.0 {
        let p = basis.projector();
        for i in 0..d {
            for j in 0..d {
                let id = if i == j { ONE } else { ZERO };
                rho[(i, j)] += (id - p[(i, j)]) * coef.complement;
            }
        }
    }
    for &(w, k) in &coef.dense {
        let AttractorForm::Dense(x) = &basis.attractors[k].form else { unreachable!() };
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] += w * x[i * d + j];
            }
        }
    }
    rho
}

fn factored_marginal(basis: &AttractorBasis, coef: &Coefficients) -> Result<PositionDistribution> {
    let spec = basis.spec;
    let d = basis.dim();
    let n = basis.states.len();
    let mut diag = vec![0.0; d];
    // sum_ab w_ab phi_a(i) conj(phi_b(i)) = phi(i)^T W conj(phi(i))
    let mut tmp = vec![ZERO; n];
    for (i, out) in diag.iter_mut().enumerate() {
        for (z, state) in tmp.iter_mut().zip(&basis.states) {
            *z = state.vector()[i].conj();
        }
        let mut acc = ZERO;
        for a in 0..n {
            let va = basis.states[a].vector()[i];
            if va == ZERO {
                continue;
            }
            let row = &coef.outer[a * n..(a + 1) * n];
            let s: c64 = row.iter().zip(&tmp).map(|(w, z)| w * z).sum();
            acc += va * s;
        }
        let in_span: f64 = (0..n).map(|a| basis.states[a].vector()[i].norm_sqr()).sum();
        *out = acc.re + coef.complement * (1.0 - in_span);
    }
    for &(w, k) in &coef.dense {
        let AttractorForm::Dense(x) = &basis.attractors[k].form else { unreachable!() };
        for (i, out) in diag.iter_mut().enumerate() {
            *out += (w * x[i * d + i]).re;
        }
    }
    let probs = diag.chunks_exact(4).map(|b| b.iter().sum()).collect();
    PositionDistribution::new(spec.m(), spec.n(), probs)
}

/// `rho_as(t)` as a dense matrix.
pub fn asymptotic_state(basis: &AttractorBasis, rho0: &DensityOperator, t: u64) -> Result<DensityOperator> {
    guard("dense asymptotic state", basis.dim(), DENSE_GUARD)?;
    let coef = coefficients(basis, &Initial::Mixed(rho0), t)?;
    let m = dense_state(basis, &coef);
    Ok(DensityOperator::from_raw(
        basis.dim(),
        (0..basis.dim() * basis.dim()).map(|k| m[(k / basis.dim(), k % basis.dim())]).collect(),
    ))
}

/// Position marginal of `rho_as(t)` without forming dense attractors.
pub fn asymptotic_marginal(basis: &AttractorBasis, rho0: &DensityOperator, t: u64) -> Result<PositionDistribution> {
    let coef = coefficients(basis, &Initial::Mixed(rho0), t)?;
    factored_marginal(basis, &coef)
}

/// [`asymptotic_marginal`] for a pure initial state, in `O(n^2 d)`.
pub fn asymptotic_marginal_pure(basis: &AttractorBasis, psi0: &StateVector, t: u64) -> Result<PositionDistribution> {
    let coef = coefficients(basis, &Initial::Pure(psi0), t)?;
    factored_marginal(basis, &coef)
}

fn fastpath_parts(
    decomp: &AsymptoticDecomposition,
    ch: &PercolationChannel,
    rho0: &Initial<'_>,
) -> Result<(Vec<c64>, f64)> {
    if !decomp.completeness.allows_fastpath() {
        return Err(Error::Certification(format!(
            "fast asymptotic formula needs a certified attractor space (have {})",
            decomp.completeness
        )));
    }
    if ch.spec() != &decomp.spec {
        return Err(Error::InvalidLattice("decomposition and channel lattices differ".into()));
    }
    if rho0.dim() != decomp.spec.dim() {
        return Err(Error::DimensionMismatch { expected: decomp.spec.dim(), actual: rho0.dim() });
    }
    let (w, comp_trace) = overlaps(&decomp.states, rho0);
    let comp = decomp.complement_trace();
    Ok((w, if comp == 0 { 0.0 } else { comp_trace / comp as f64 }))
}

/// `U^t P rho0 P U^dagger^t + (I - P) Tr(rho0 (I - P)) / Tr(I - P)` with
/// `U = I (x) RC`, the all-edges-broken step.
pub fn asymptotic_fastpath(
    decomp: &AsymptoticDecomposition,
    ch: &PercolationChannel,
    rho0: &DensityOperator,
    t: u64,
) -> Result<DensityOperator> {
    guard("dense asymptotic state", decomp.spec.dim(), DENSE_GUARD)?;
    let (w, scale) = fastpath_parts(decomp, ch, &Initial::Mixed(rho0))?;
    let d = decomp.spec.dim();
    let n = decomp.rank();
    // P rho0 P evolved: each |phi_a> picks up (RC)^t sitewise
    let ut = ch.coin().reflected().pow(t);
    let evolved: Vec<Vec<c64>> = decomp
        .states
        .iter()
        .map(|s| {
            let mut out = vec![ZERO; d];
            for (site, block) in s.vector().chunks_exact(4).enumerate() {
                out[4 * site..4 * site + 4].copy_from_slice(&ut.apply(&[block[0], block[1], block[2], block[3]]));
            }
            out
        })
        .collect();
    let p = decomp.projector();
    let mut data = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            let id = if i == j { ONE } else { ZERO };
            data[i * d + j] = (id - p[(i, j)]) * scale;
        }
    }
    for a in 0..n {
        for b in 0..n {
            let wab = w[a * n + b];
            if wab == ZERO {
                continue;
            }
            for i in 0..d {
                let left = wab * evolved[a][i];
                for j in 0..d {
                    data[i * d + j] += left * evolved[b][j].conj();
                }
            }
        }
    }
    Ok(DensityOperator::from_raw(d, data))
}

/// Position marginal of [`asymptotic_fastpath`] for a pure initial state.
/// The sitewise unitary drops out of the marginal.
pub fn fastpath_marginal_pure(
    decomp: &AsymptoticDecomposition,
    ch: &PercolationChannel,
    psi0: &StateVector,
) -> Result<PositionDistribution> {
    let (w, scale) = fastpath_parts(decomp, ch, &Initial::Pure(psi0))?;
    let basis = AttractorBasis {
        spec: decomp.spec,
        coin_kind: ch.coin().kind(),
        states: decomp.states.clone(),
        attractors: Vec::new(),
        completeness: decomp.completeness,
    };
    factored_marginal(&basis, &Coefficients { outer: w, complement: scale, dense: Vec::new() })
}

/// Closed-form attractor dimension for a named coin.
///
/// Hadamard: `1 + (n12 + N + n4)^2` with `n12 = 2` when the s axis is open or
/// `M` even, `n4 = M` when the t axis is open or `N` even.
/// Grover: `1 + n^2` with `n = 1 + MN + [t open] M + [s open] N + [torus, M and N even]`.
/// Fourier: 17 unless some periodic extent is not a multiple of 8, then 1.
pub fn analytic_dimension(spec: &LatticeSpec, kind: CoinKind) -> Option<usize> {
    let (m, n) = (spec.m(), spec.n());
    let s_open = spec.boundary_s() == Boundary::Open;
    let t_open = spec.boundary_t() == Boundary::Open;
    let states = match kind {
        CoinKind::Hadamard2d => {
            let n12 = if s_open || m % 2 == 0 { 2 } else { 0 };
            let n4 = if t_open || n % 2 == 0 { m } else { 0 };
            n12 + n + n4
        }
        CoinKind::Grover => {
            let extra = usize::from(!s_open && !t_open && m % 2 == 0 && n % 2 == 0);
            1 + m * n + if t_open { m } else { 0 } + if s_open { n } else { 0 } + extra
        }
        CoinKind::Fourier => {
            let s_ok = s_open || m % 8 == 0;
            let t_ok = t_open || n % 8 == 0;
            if s_ok && t_ok {
                4
            } else {
                0
            }
        }
        CoinKind::Custom => return None,
    };
    Some(1 + states * states)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionReport {
    pub analytic_count: Option<usize>,
    pub numeric_count: usize,
    pub eigenstates: usize,
    pub matches: bool,
}

impl DimensionReport {
    pub fn to_json(&self) -> Value {
        json!({
            "analytic_count": self.analytic_count,
            "numeric_count": self.numeric_count,
            "eigenstates": self.eigenstates,
            "match": self.matches,
        })
    }
}

/// Closed form against the numeric count `n^2 + 1` from eigenstate
/// enumeration on `ch`.
pub fn dimension_report(ch: &PercolationChannel) -> Result<DimensionReport> {
    let found = find_common_eigenstates_numeric(ch)?;
    if let Some(bad) = found.rejected.first() {
        return Err(Error::Verification(format!(
            "{} candidate eigenstates failed verification (alpha {}, residual {:.3e})",
            found.rejected.len(),
            bad.alpha,
            bad.residual
        )));
    }
    let n = found.states.len();
    let numeric_count = minimal_dimension(n, ch.dim());
    let analytic_count = analytic_dimension(ch.spec(), ch.coin().kind());
    Ok(DimensionReport {
        analytic_count,
        numeric_count,
        eigenstates: n,
        matches: analytic_count.is_none_or(|a| a == numeric_count),
    })
}

/// Sorted eigenvalue multiset as `[re, im]` pairs rounded to 12 digits.
pub fn lambda_multiset(basis: &AttractorBasis) -> Vec<[f64; 2]> {
    let round = |x: f64| {
        let r = (x * 1e12).round() / 1e12;
        if r == 0.0 {
            0.0
        } else {
            r
        }
    };
    let mut out: Vec<[f64; 2]> = basis.lambdas().iter().map(|z| [round(z.re), round(z.im)]).collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out
}

/// The step unitary of the all-edges-broken graph, `I (x) RC`.
pub fn broken_unitary(ch: &PercolationChannel) -> StepUnitary {
    ch.step_unitary(&EdgeConfiguration::empty(ch.spec()))
}
