//! Coin operators, the reflection operator and the local eigenproblem of `RC`.

use std::fmt;
use std::str::FromStr;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, Mat4, I, ONE, ZERO};

pub const UNITARITY_TOL: f64 = 1e-12;
/// Eigenvalues of `RC` closer than this in phase belong to one eigenspace.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoinKind {
    Hadamard2d,
    Grover,
    Fourier,
    Custom,
}

impl CoinKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CoinKind::Hadamard2d => "hadamard2d",
            CoinKind::Grover => "grover",
            CoinKind::Fourier => "fourier",
            CoinKind::Custom => "custom",
        }
    }

    /// The three coins with closed-form common eigenstates.
    pub fn is_analyzed(self) -> bool {
        !matches!(self, CoinKind::Custom)
    }
}

impl fmt::Display for CoinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoinKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hadamard2d" | "hadamard" => Ok(CoinKind::Hadamard2d),
            "grover" => Ok(CoinKind::Grover),
            "fourier" | "dft" => Ok(CoinKind::Fourier),
            "custom" => Ok(CoinKind::Custom),
            other => Err(Error::Parse(format!("unknown coin `{other}`"))),
        }
    }
}

/// A unitary 4x4 coin in the basis `(L, D, U, R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoinOperator {
    kind: CoinKind,
    matrix: Mat4,
}

impl CoinOperator {
    pub fn hadamard2d() -> Self {
        // H (x) H
        let h = [[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
        CoinOperator { kind: CoinKind::Hadamard2d, matrix: Mat4::from_fn(|i, j| c64::new(0.5 * h[i][j], 0.0)) }
    }

    /// Grover diffusion `G_ij = 2/d - delta_ij` with `d = 4`.
    pub fn grover() -> Self {
        let m = Mat4::from_fn(|i, j| c64::new(0.5 - if i == j { 1.0 } else { 0.0 }, 0.0));
        CoinOperator { kind: CoinKind::Grover, matrix: m }
    }

    /// Discrete Fourier transform, entry `(k, l)` equal to `(-i)^(k l) / 2`.
    pub fn fourier() -> Self {
        let powers = [ONE, -I, -ONE, I];
        let m = Mat4::from_fn(|k, l| powers[(k * l) % 4] * 0.5);
        CoinOperator { kind: CoinKind::Fourier, matrix: m }
    }

    pub fn custom(matrix: Mat4) -> Result<Self> {
        let residual = matrix.unitarity_residual();
        if residual > UNITARITY_TOL {
            return Err(Error::NonUnitaryCoin { residual });
        }
        Ok(CoinOperator { kind: CoinKind::Custom, matrix })
    }

    pub fn from_kind(kind: CoinKind) -> Result<Self> {
        match kind {
            CoinKind::Hadamard2d => Ok(Self::hadamard2d()),
            CoinKind::Grover => Ok(Self::grover()),
            CoinKind::Fourier => Ok(Self::fourier()),
            CoinKind::Custom => Err(Error::Parse("custom coin needs an explicit matrix".into())),
        }
    }

    /// Reads a JSON 4x4 array of `[re, im]` pairs.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let rows = value
            .as_array()
            .filter(|r| r.len() == 4)
            .ok_or_else(|| Error::Parse("custom coin must be a 4x4 array of [re, im] pairs".into()))?;
        let mut m = Mat4::zeros();
        for (i, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .filter(|r| r.len() == 4)
                .ok_or_else(|| Error::Parse(format!("coin row {i} must have 4 entries")))?;
            for (j, entry) in row.iter().enumerate() {
                let pair = entry
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .and_then(|p| Some((p[0].as_f64()?, p[1].as_f64()?)))
                    .ok_or_else(|| Error::Parse(format!("coin entry ({i}, {j}) must be [re, im]")))?;
                m.0[i][j] = c64::new(pair.0, pair.1);
            }
        }
        Self::custom(m)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.matrix
                .0
                .iter()
                .map(|row| Value::Array(row.iter().map(|z| serde_json::json!([z.re, z.im])).collect()))
                .collect(),
        )
    }

    pub fn kind(&self) -> CoinKind {
        self.kind
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }

    pub fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    /// `R C`, the one-step map on a site whose four edges are all broken.
    pub fn reflected(&self) -> Mat4 {
        reflection().mul(&self.matrix)
    }

    /// The same coin multiplied by a global phase.
    pub fn with_global_phase(&self, phase: c64) -> CoinOperator {
        CoinOperator { kind: self.kind, matrix: self.matrix.scale(phase) }
    }
}

/// `sigma_x (x) sigma_x`: maps `|c>` to `|~c>`.
pub fn reflection() -> Mat4 {
    Mat4::from_fn(|i, j| if i + j == 3 { ONE } else { ZERO })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalEigenpair {
    pub alpha: c64,
    pub vector: [c64; 4],
}

/// A (possibly degenerate) eigenspace of `RC` with an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalEigenspace {
    pub alpha: c64,
    pub vectors: Vec<[c64; 4]>,
}

/// Eigenspaces of `R C`, sorted by eigenvalue phase in `[0, 2 pi)`.
pub fn rc_eigenspaces(coin: &CoinOperator) -> Result<Vec<LocalEigenspace>> {
    let rc = coin.reflected();
    let raw = linalg::eigenvalues(&rc.to_faer())?;
    let mut clusters: Vec<Vec<c64>> = Vec::new();
    for z in raw {
        let z = z / z.norm();
        match clusters.iter_mut().find(|c| linalg::phase_distance(c[0], z) < DEGENERACY_TOL) {
            Some(c) => c.push(z),
            None => clusters.push(vec![z]),
        }
    }
    let mut spaces = Vec::with_capacity(clusters.len());
    for members in clusters {
        let mean: c64 = members.iter().sum::<c64>() / members.len() as f64;
        let alpha = snap_unit(mean / mean.norm());
        let shifted = Mat4::from_fn(|i, j| rc.get(i, j) - if i == j { alpha } else { ZERO });
        let (_, vecs) = linalg::smallest_right_singular_vectors(&shifted.to_faer(), members.len())?;
        let vectors = vecs
            .into_iter()
            .map(|mut v| {
                linalg::fix_phase(&mut v, 1e-12);
                [v[0], v[1], v[2], v[3]]
            })
            .collect();
        spaces.push(LocalEigenspace { alpha, vectors });
    }
    spaces.sort_by(|a, b| linalg::phase_0_2pi(a.alpha).total_cmp(&linalg::phase_0_2pi(b.alpha)));
    Ok(spaces)
}

/// All four eigenpairs of `R C`; degenerate eigenvalues repeat with an
/// orthonormal basis of their eigenspace.
pub fn rc_spectrum(coin: &CoinOperator) -> Result<Vec<LocalEigenpair>> {
    Ok(rc_eigenspaces(coin)?
        .into_iter()
        .flat_map(|space| {
            let alpha = space.alpha;
            space.vectors.into_iter().map(move |vector| LocalEigenpair { alpha, vector })
        })
        .collect())
}

/// Rounds values that are within 1e-14 of a real or imaginary axis onto it.
fn snap_unit(z: c64) -> c64 {
    let snap = |x: f64| if x.abs() < 1e-14 { 0.0 } else { x };
    let z = c64::new(snap(z.re), snap(z.im));
    z / z.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: c64, b: c64) -> bool {
        (a - b).norm() < 1e-10
    }

    fn all_coins() -> Vec<CoinOperator> {
        vec![CoinOperator::hadamard2d(), CoinOperator::grover(), CoinOperator::fourier()]
    }

    #[test]
    fn registry_matrices() {
        let h = CoinOperator::hadamard2d();
        for j in 0..4 {
            assert_eq!(h.matrix().get(0, j), c64::new(0.5, 0.0));
        }
        let g = CoinOperator::grover();
        for i in 0..4 {
            for j in 0..4 {
                let expect = 2.0 / 4.0 - if i == j { 1.0 } else { 0.0 };
                assert_eq!(g.matrix().get(i, j), c64::new(expect, 0.0));
            }
        }
        let f = CoinOperator::fourier();
        let row = [ONE, -I, -ONE, I];
        for (j, z) in row.iter().enumerate() {
            assert!(close(f.matrix().get(1, j), z * 0.5));
        }
    }

    #[test]
    fn coins_and_rc_are_unitary() {
        for c in all_coins() {
            assert!(c.matrix().unitarity_residual() <= UNITARITY_TOL);
            assert!(c.reflected().unitarity_residual() <= UNITARITY_TOL);
        }
        let r = reflection();
        assert!(r.mul(&r).max_abs_diff(&Mat4::identity()) == 0.0);
    }

    #[test]
    fn rejects_non_unitary_custom() {
        let mut m = Mat4::identity();
        m.0[0][1] = c64::new(0.1, 0.0);
        match CoinOperator::custom(m) {
            Err(Error::NonUnitaryCoin { residual }) => assert!(residual > 0.05),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn hadamard_spectrum() {
        let spec = rc_spectrum(&CoinOperator::hadamard2d()).unwrap();
        let alphas: Vec<c64> = spec.iter().map(|p| p.alpha).collect();
        assert!(close(alphas[0], ONE) && close(alphas[1], ONE));
        assert!(close(alphas[2], I) && close(alphas[3], -I));
        let v1 = spec[2].vector;
        let expect = [c64::new(0.5, 0.0), c64::new(0.0, -0.5), c64::new(0.0, -0.5), c64::new(-0.5, 0.0)];
        for k in 0..4 {
            assert!(close(v1[k], expect[k]), "{v1:?}");
        }
    }

    #[test]
    fn grover_spectrum() {
        let spaces = rc_eigenspaces(&CoinOperator::grover()).unwrap();
        assert_eq!(spaces.len(), 2);
        assert!(close(spaces[0].alpha, ONE));
        assert_eq!(spaces[0].vectors.len(), 3);
        assert!(close(spaces[1].alpha, -ONE));
        let v = spaces[1].vectors[0];
        let expect = [0.5, -0.5, -0.5, 0.5];
        for k in 0..4 {
            assert!(close(v[k], c64::new(expect[k], 0.0)));
        }
    }

    #[test]
    fn fourier_spectrum() {
        let spec = rc_spectrum(&CoinOperator::fourier()).unwrap();
        let mut phases: Vec<f64> = spec.iter().map(|p| linalg::phase_0_2pi(p.alpha)).collect();
        phases.sort_by(f64::total_cmp);
        for (n, ph) in phases.iter().enumerate() {
            assert!((ph - PI / 8.0 * (3.0 + 4.0 * n as f64)).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenpairs_satisfy_rc() {
        for c in all_coins() {
            let rc = c.reflected();
            let spec = rc_spectrum(&c).unwrap();
            assert_eq!(spec.len(), 4);
            for p in &spec {
                assert!((p.alpha.norm() - 1.0).abs() < 1e-10);
                let lhs = rc.apply(&p.vector);
                for (l, v) in lhs.iter().zip(&p.vector) {
                    assert!((l - p.alpha * v).norm() < 1e-10);
                }
            }
            for (i, a) in spec.iter().enumerate() {
                for (j, b) in spec.iter().enumerate() {
                    let ip = linalg::dot(&a.vector, &b.vector);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - c64::new(expect, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn spectrum_shifts_with_global_phase() {
        let phase = c64::from_polar(1.0, 0.3);
        for c in all_coins() {
            let base = rc_spectrum(&c).unwrap();
            let shifted = rc_spectrum(&c.with_global_phase(phase)).unwrap();
            let mut a: Vec<f64> = base.iter().map(|p| linalg::phase_0_2pi(p.alpha * phase)).collect();
            let mut b: Vec<f64> = shifted.iter().map(|p| linalg::phase_0_2pi(p.alpha)).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
            // products alpha* beta are unchanged
            for p in &base {
                for q in &base {
                    let lam = p.alpha.conj() * q.alpha;
                    let lam2 = (p.alpha * phase).conj() * (q.alpha * phase);
                    assert!(close(lam, lam2));
                }
            }
        }
    }

    #[test]
    fn custom_coin_json() {
        let g = CoinOperator::grover();
        let text = serde_json::to_string(&g.to_json()).unwrap();
        let back = CoinOperator::from_json(&text).unwrap();
        assert_eq!(back.kind(), CoinKind::Custom);
        assert!(back.matrix().max_abs_diff(g.matrix()) == 0.0);
        assert!(CoinOperator::from_json("[[1,0],[0,1]]").is_err());
        let bad =
            "[[[2,0],[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[1,0],[0,0]],[[0,0],[0,0],[0,0],[1,0]]]";
        assert!(matches!(CoinOperator::from_json(bad), Err(Error::NonUnitaryCoin { .. })));
    }
}
