//! Lattice geometry for `M x N` grids with per-axis boundary conditions.
//!
//! The `s` axis is horizontal (hops `L`/`R`), the `t` axis vertical (hops
//! `D`/`U`). Directed basis states `|s, t, c>` are laid out row-major in
//! `(s, t)` followed by the coin index, see [`LatticeSpec::basis_index`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Boundary condition along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Open,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Open => "open",
        }
    }

    pub fn is_periodic(self) -> bool {
        matches!(self, Boundary::Periodic)
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" | "torus" => Ok(Boundary::Periodic),
            "open" | "carpet" | "reflecting" => Ok(Boundary::Open),
            other => Err(Error::Parse(format!("unknown boundary `{other}`"))),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coin direction. The discriminant is the coin index in the basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    L = 0,
    D = 1,
    U = 2,
    R = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::L, Direction::D, Direction::U, Direction::R];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Direction {
        Direction::ALL[i]
    }

    /// The involution `~`: `L <-> R`, `D <-> U`.
    pub fn reversed(self) -> Direction {
        match self {
            Direction::L => Direction::R,
            Direction::R => Direction::L,
            Direction::D => Direction::U,
            Direction::U => Direction::D,
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            Direction::L | Direction::R => Axis::S,
            Direction::D | Direction::U => Axis::T,
        }
    }

    pub fn label(self) -> char {
        match self {
            Direction::L => 'L',
            Direction::D => 'D',
            Direction::U => 'U',
            Direction::R => 'R',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    S,
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub s: usize,
    pub t: usize,
}

impl Site {
    pub fn new(s: usize, t: usize) -> Self {
        Site { s, t }
    }
}

/// An undirected lattice edge, identified by its canonical endpoint and axis.
///
/// An `S` edge joins `(s, t)` and `(s + 1, t)`, a `T` edge joins `(s, t)` and
/// `(s, t + 1)`, wrapping only along periodic axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub site: Site,
    pub axis: Axis,
}

/// Result of stepping off a site: either a neighbouring site or the exterior
/// of an open boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hop<T> {
    To(T),
    Wall,
}

impl<T> Hop<T> {
    pub fn into_option(self) -> Option<T> {
        match self {
            Hop::To(x) => Some(x),
            Hop::Wall => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    m: usize,
    n: usize,
    boundary_s: Boundary,
    boundary_t: Boundary,
}

impl LatticeSpec {
    pub fn new(m: usize, n: usize, boundary_s: Boundary, boundary_t: Boundary) -> Result<Self> {
        if m < 3 || n < 3 {
            return Err(Error::InvalidLattice(format!("lattice extents must be at least 3, got {m}x{n}")));
        }
        Ok(LatticeSpec { m, n, boundary_s, boundary_t })
    }

    pub fn torus(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, Boundary::Periodic, Boundary::Periodic)
    }

    pub fn carpet(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, Boundary::Open, Boundary::Open)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn boundary_s(&self) -> Boundary {
        self.boundary_s
    }

    pub fn boundary_t(&self) -> Boundary {
        self.boundary_t
    }

    pub fn num_sites(&self) -> usize {
        self.m * self.n
    }

    /// Hilbert space dimension `4 M N`.
    pub fn dim(&self) -> usize {
        4 * self.m * self.n
    }

    /// The same lattice with the two axes exchanged.
    pub fn transposed(&self) -> LatticeSpec {
        LatticeSpec { m: self.n, n: self.m, boundary_s: self.boundary_t, boundary_t: self.boundary_s }
    }

    pub fn contains(&self, site: Site) -> bool {
        site.s < self.m && site.t < self.n
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.m).flat_map(move |s| (0..self.n).map(move |t| Site { s, t }))
    }

    pub fn site_index(&self, site: Site) -> usize {
        site.s * self.n + site.t
    }

    pub fn site_at(&self, index: usize) -> Site {
        Site { s: index / self.n, t: index % self.n }
    }

    /// `4 (s N + t) + c`.
    pub fn basis_index(&self, site: Site, c: Direction) -> Result<usize> {
        if !self.contains(site) {
            return Err(Error::OutOfRange(format!(
                "site ({}, {}) outside {}x{} lattice",
                site.s, site.t, self.m, self.n
            )));
        }
        Ok(4 * self.site_index(site) + c.index())
    }

    pub fn basis_state(&self, index: usize) -> Result<(Site, Direction)> {
        if index >= self.dim() {
            return Err(Error::OutOfRange(format!("basis index {index} >= {}", self.dim())));
        }
        Ok((self.site_at(index / 4), Direction::from_index(index % 4)))
    }

    /// `site (+) c`, wrapping on periodic axes.
    pub fn neighbor(&self, site: Site, c: Direction) -> Hop<Site> {
        let step = |x: usize, len: usize, forward: bool, b: Boundary| -> Option<usize> {
            match (forward, b) {
                (true, _) if x + 1 < len => Some(x + 1),
                (true, Boundary::Periodic) => Some(0),
                (false, _) if x > 0 => Some(x - 1),
                (false, Boundary::Periodic) => Some(len - 1),
                _ => None,
            }
        };
        let moved = match c {
            Direction::L => step(site.s, self.m, false, self.boundary_s).map(|s| Site { s, t: site.t }),
            Direction::R => step(site.s, self.m, true, self.boundary_s).map(|s| Site { s, t: site.t }),
            Direction::D => step(site.t, self.n, false, self.boundary_t).map(|t| Site { s: site.s, t }),
            Direction::U => step(site.t, self.n, true, self.boundary_t).map(|t| Site { s: site.s, t }),
        };
        moved.map_or(Hop::Wall, Hop::To)
    }

    /// The undirected edge crossed when hopping from `site` towards `c`.
    pub fn edge_of(&self, site: Site, c: Direction) -> Hop<Edge> {
        match self.neighbor(site, c) {
            Hop::Wall => Hop::Wall,
            Hop::To(next) => {
                let canonical = match c {
                    Direction::R | Direction::U => site,
                    Direction::L | Direction::D => next,
                };
                Hop::To(Edge { site: canonical, axis: c.axis() })
            }
        }
    }

    fn s_edges_per_row(&self) -> usize {
        if self.boundary_s.is_periodic() {
            self.m
        } else {
            self.m - 1
        }
    }

    fn t_edges_per_column(&self) -> usize {
        if self.boundary_t.is_periodic() {
            self.n
        } else {
            self.n - 1
        }
    }

    pub fn num_edges(&self) -> usize {
        self.s_edges_per_row() * self.n + self.m * self.t_edges_per_column()
    }

    /// Dense index of an edge in `[0, num_edges)`: all `S` edges first.
    pub fn edge_index(&self, edge: Edge) -> usize {
        match edge.axis {
            Axis::S => edge.site.s * self.n + edge.site.t,
            Axis::T => self.s_edges_per_row() * self.n + edge.site.s * self.t_edges_per_column() + edge.site.t,
        }
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.num_edges());
        for s in 0..self.s_edges_per_row() {
            for t in 0..self.n {
                out.push(Edge { site: Site { s, t }, axis: Axis::S });
            }
        }
        for s in 0..self.m {
            for t in 0..self.t_edges_per_column() {
                out.push(Edge { site: Site { s, t }, axis: Axis::T });
            }
        }
        out
    }

    /// Compact `MxN:<s-boundary>,<t-boundary>` form.
    pub fn to_spec_string(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}:{},{}", self.m, self.n, self.boundary_s, self.boundary_t)
    }
}

impl FromStr for LatticeSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (size, bounds) = text
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("lattice `{text}` is not of the form MxN:<s>,<t>")))?;
        let (m, n) = parse_size(size)?;
        let (bs, bt) = bounds
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("lattice boundaries `{bounds}` need two entries")))?;
        LatticeSpec::new(m, n, bs.parse()?, bt.parse()?)
    }
}

/// Parses `MxN`.
pub fn parse_size(text: &str) -> Result<(usize, usize)> {
    let (m, n) = text
        .trim()
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Parse(format!("size `{text}` is not of the form MxN")))?;
    let m = m.trim().parse().map_err(|_| Error::Parse(format!("bad extent `{m}`")))?;
    let n = n.trim().parse().map_err(|_| Error::Parse(format!("bad extent `{n}`")))?;
    Ok((m, n))
}
