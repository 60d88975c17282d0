//! Closed-form common eigenstates of the Hadamard, Grover and Fourier walks.
//!
//! `*_family` returns every member of the closed-form families that is
//! compatible with the boundary conditions, each normalized on its own.
//! `*_states` orthonormalizes those members within each eigenvalue and drops
//! linearly dependent ones.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::attractors::{CommonEigenstate, RANK_TOL};
use crate::coin::{CoinKind, CoinOperator};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, LatticeSpec};
use crate::linalg::{self, c64, I, ONE, ZERO};

/// One closed-form eigenstate, normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyMember {
    pub label: String,
    pub alpha: c64,
    pub vector: Vec<c64>,
}

struct Builder<'a> {
    spec: &'a LatticeSpec,
    out: Vec<FamilyMember>,
}

impl<'a> Builder<'a> {
    fn new(spec: &'a LatticeSpec) -> Self {
        Builder { spec, out: Vec::new() }
    }

    /// Adds `coin` at `(s, t)`; coordinates past the edge wrap on periodic
    /// axes and are dropped on open ones.
    fn put(&self, v: &mut [c64], s: usize, t: usize, coin: [c64; 4]) {
        let (m, n) = (self.spec.m(), self.spec.n());
        let s = match (s < m, self.spec.boundary_s()) {
            (true, _) => s,
            (false, Boundary::Periodic) => s % m,
            (false, Boundary::Open) => return,
        };
        let t = match (t < n, self.spec.boundary_t()) {
            (true, _) => t,
            (false, Boundary::Periodic) => t % n,
            (false, Boundary::Open) => return,
        };
        let base = 4 * (s * n + t);
        for c in 0..4 {
            v[base + c] += coin[c];
        }
    }

    fn push(&mut self, label: String, alpha: c64, mut vector: Vec<c64>) {
        let norm = linalg::norm(&vector);
        if norm == 0.0 {
            return;
        }
        vector.iter_mut().for_each(|z| *z /= norm);
        self.out.push(FamilyMember { label, alpha, vector });
    }

    fn zeros(&self) -> Vec<c64> {
        vec![ZERO; self.spec.dim()]
    }
}

fn real(v: [f64; 4]) -> [c64; 4] {
    v.map(|x| c64::new(x, 0.0))
}

fn scaled(v: [c64; 4], k: f64) -> [c64; 4] {
    v.map(|z| z * k)
}

fn add(a: [c64; 4], b: [c64; 4]) -> [c64; 4] {
    std::array::from_fn(|i| a[i] + b[i])
}

fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn open_or_even(boundary: Boundary, extent: usize) -> bool {
    boundary == Boundary::Open || extent.is_multiple_of(2)
}

fn require(coin: &CoinOperator, kind: CoinKind) -> Result<()> {
    let reference = CoinOperator::from_kind(kind)?;
    if coin.kind() != kind || coin.matrix().max_abs_diff(reference.matrix()) > 1e-12 {
        return Err(Error::WrongCoin(format!("expected {kind}, got {}", coin.name())));
    }
    Ok(())
}

/// Hadamard walk: `phi_1, phi_2` (`alpha = +-i`, staggered in s),
/// `phi_3(t)` (`alpha = 1`, one row of constant t) and `phi_4(s)`
/// (`alpha = 1`, one column staggered in t).
pub fn hadamard_family(spec: &LatticeSpec) -> Vec<FamilyMember> {
    let (m, n) = (spec.m(), spec.n());
    let mut b = Builder::new(spec);
    let v1 = [ONE, -I, -I, -ONE].map(|z| z * 0.5);
    let v2 = [ONE, I, I, -ONE].map(|z| z * 0.5);
    let v3 = real([FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]);
    let v4 = real([0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0]);
    if open_or_even(spec.boundary_s(), m) {
        for (label, alpha, v) in [("phi1", I, v1), ("phi2", -I, v2)] {
            let mut f = b.zeros();
            for s in 0..m {
                for t in 0..n {
                    b.put(&mut f, s, t, scaled(v, sign(s)));
                }
            }
            b.push(label.into(), alpha, f);
        }
    }
    for t in 0..n {
        let mut f = b.zeros();
        for s in 0..m {
            b.put(&mut f, s, t, v3);
        }
        b.push(format!("phi3({t})"), ONE, f);
    }
    if open_or_even(spec.boundary_t(), n) {
        for s in 0..m {
            let mut f = b.zeros();
            for t in 0..n {
                b.put(&mut f, s, t, scaled(v4, sign(t)));
            }
            b.push(format!("phi4({s})"), ONE, f);
        }
    }
    b.out
}

/// Grover walk: the uniform `phi_1` (`alpha = -1`), the 2x2-supported
/// `phi_2(s, t)` and the stripes `phi_3(s)`, `phi_4(t)` (all `alpha = 1`).
pub fn grover_family(spec: &LatticeSpec) -> Vec<FamilyMember> {
    let (m, n) = (spec.m(), spec.n());
    let mut b = Builder::new(spec);
    let v1 = real([1.0, -1.0, -1.0, 1.0]);
    let v2 = real([1.0, 1.0, 0.0, 0.0]);
    let v3 = real([0.0, -1.0, 1.0, 0.0]);
    let v4 = real([-1.0, 0.0, 0.0, 1.0]);
    let mut f = b.zeros();
    for s in 0..m {
        for t in 0..n {
            b.put(&mut f, s, t, v1);
        }
    }
    b.push("phi1".into(), -ONE, f);
    for s in 0..m {
        for t in 0..n {
            let mut f = b.zeros();
            b.put(&mut f, s, t, v2);
            b.put(&mut f, s, t + 1, add(v2, v3));
            b.put(&mut f, s + 1, t, add(v2, v4));
            b.put(&mut f, s + 1, t + 1, add(add(v2, v3), v4));
            b.push(format!("phi2({s},{t})"), ONE, f);
        }
    }
    if open_or_even(spec.boundary_t(), n) {
        for s in 0..m {
            let mut f = b.zeros();
            for t in 0..n {
                b.put(&mut f, s, t, scaled(v3, sign(t)));
            }
            b.push(format!("phi3({s})"), ONE, f);
        }
    }
    if open_or_even(spec.boundary_s(), m) {
        for t in 0..n {
            let mut f = b.zeros();
            for s in 0..m {
                b.put(&mut f, s, t, scaled(v4, sign(s)));
            }
            b.push(format!("phi4({t})"), ONE, f);
        }
    }
    b.out
}

/// Eigenvalue `alpha_n = exp(i pi (3 + 4n) / 8)` of the Fourier walk.
pub fn fourier_alpha(n: usize) -> c64 {
    c64::from_polar(1.0, PI * (3.0 + 4.0 * n as f64) / 8.0)
}

/// Coin part `v_n` (normalized) and plane-wave factors `(x_n, y_n)` with
/// `x_n = v_D / v_U` per unit step in t and `y_n = v_L / v_R` per unit step in s.
pub fn fourier_mode(n: usize) -> ([c64; 4], c64, c64) {
    let a = fourier_alpha(n);
    let a2 = a * a;
    let raw = [(a + ONE) * (a + ONE), a2 + I, a2 - ONE, a2 * a * 2.0 + a2 - I].map(|z| z.conj());
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v = raw.map(|z| z / norm);
    (v, v[1] / v[2], v[0] / v[3])
}

/// Fourier walk: four plane-wave states `sum x_n^t y_n^s |s,t> (x) v_n`.
/// The phases `x_n, y_n` are 8th roots of unity, so on a periodic axis the
/// states exist only when its extent is a multiple of 8.
pub fn fourier_family(spec: &LatticeSpec) -> Vec<FamilyMember> {
    let (m, n) = (spec.m(), spec.n());
    let mut b = Builder::new(spec);
    let s_ok = spec.boundary_s() == Boundary::Open || m % 8 == 0;
    let t_ok = spec.boundary_t() == Boundary::Open || n % 8 == 0;
    if !(s_ok && t_ok) {
        return b.out;
    }
    for k in 0..4 {
        let (v, x, y) = fourier_mode(k);
        let mut f = b.zeros();
        for s in 0..m {
            for t in 0..n {
                let phase = x.powi(t as i32) * y.powi(s as i32);
                b.put(&mut f, s, t, v.map(|z| z * phase));
            }
        }
        b.push(format!("phi_{k}"), fourier_alpha(k), f);
    }
    b.out
}

/// Orthonormalizes `family` within each eigenvalue, in order, keeping the
/// label of the member that contributed each direction.
pub fn orthonormal_states(family: Vec<FamilyMember>) -> Vec<CommonEigenstate> {
    let mut alphas: Vec<c64> = Vec::new();
    for m in &family {
        if alphas.iter().all(|a| (a - m.alpha).norm() > 1e-9) {
            alphas.push(m.alpha);
        }
    }
    let mut out = Vec::new();
    for alpha in alphas {
        let members: Vec<&FamilyMember> = family.iter().filter(|m| (m.alpha - alpha).norm() <= 1e-9).collect();
        let vectors: Vec<Vec<c64>> = members.iter().map(|m| m.vector.clone()).collect();
        let (basis, kept) = linalg::orthonormalize(&vectors, RANK_TOL);
        for (index, (v, k)) in basis.into_iter().zip(kept).enumerate() {
            out.push(CommonEigenstate::new(alpha, index, members[k].label.clone(), v));
        }
    }
    out
}

pub fn hadamard_states(spec: &LatticeSpec, coin: &CoinOperator) -> Result<Vec<CommonEigenstate>> {
    require(coin, CoinKind::Hadamard2d)?;
    Ok(orthonormal_states(hadamard_family(spec)))
}

pub fn grover_states(spec: &LatticeSpec, coin: &CoinOperator) -> Result<Vec<CommonEigenstate>> {
    require(coin, CoinKind::Grover)?;
    Ok(orthonormal_states(grover_family(spec)))
}

pub fn fourier_states(spec: &LatticeSpec, coin: &CoinOperator) -> Result<Vec<CommonEigenstate>> {
    require(coin, CoinKind::Fourier)?;
    Ok(orthonormal_states(fourier_family(spec)))
}

/// Closed-form eigenstates for whichever named coin `coin` is.
pub fn states(spec: &LatticeSpec, coin: &CoinOperator) -> Result<Vec<CommonEigenstate>> {
    match coin.kind() {
        CoinKind::Hadamard2d => hadamard_states(spec, coin),
        CoinKind::Grover => grover_states(spec, coin),
        CoinKind::Fourier => fourier_states(spec, coin),
        CoinKind::Custom => Err(Error::WrongCoin("no closed form for a custom coin".into())),
    }
}
