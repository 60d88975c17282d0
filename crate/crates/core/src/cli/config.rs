use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::coin::{CoinKind, CoinOperator};
use crate::error::{Error, Result};
use crate::evolution::StateVector;
use crate::lattice::{parse_size, Boundary, Direction, LatticeSpec, Site};
use crate::linalg::{c64, ZERO};

/// Tolerance on the norm of a user-supplied initial state.
pub const INITIAL_NORM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Mc,
    Unitary,
    Asymptotic,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Mc => "mc",
            Mode::Unitary => "unitary",
            Mode::Asymptotic => "asymptotic",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "mc" => Ok(Mode::Mc),
            "unitary" => Ok(Mode::Unitary),
            "asymptotic" => Ok(Mode::Asymptotic),
            _ => Err(Error::Parse(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Eq5,
    Fastpath,
    Auto,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Eq5 => "eq5",
            Method::Fastpath => "fastpath",
            Method::Auto => "auto",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq5" => Ok(Method::Eq5),
            "fastpath" => Ok(Method::Fastpath),
            "auto" => Ok(Method::Auto),
            _ => Err(Error::Parse(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Parse(format!("unknown format {s:?}"))),
        }
    }
}

/// A pure product initial state `|s,t> (x) sum_c a_c |c>` and its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialState {
    pub site: Site,
    pub coin: [c64; 4],
    pub text: String,
}

impl InitialState {
    pub fn to_state(&self, spec: &LatticeSpec) -> Result<StateVector> {
        if !spec.contains(self.site) {
            return Err(Error::OutOfRange(format!("initial site ({}, {}) outside {spec}", self.site.s, self.site.t)));
        }
        let mut amps = vec![ZERO; spec.dim()];
        let base = spec.basis_index(self.site, Direction::L)?;
        amps[base..base + 4].copy_from_slice(&self.coin);
        // the norm was checked at parse time; this only removes rounding
        StateVector::normalized(amps)
    }
}

fn parse_complex(text: &str) -> Result<c64> {
    let bad = || Error::Parse(format!("bad amplitude {text:?}"));
    let t = text.trim();
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| c64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    let re = re.parse::<f64>().map_err(|_| bad())?;
    let im = im.trim_start_matches('+').parse::<f64>().map_err(|_| bad())?;
    Ok(c64::new(re, im))
}

impl FromStr for InitialState {
    type Err = Error;

    /// `"s,t:L=<re>[+<im>i],D=...,U=...,R=..."`; omitted directions are zero.
    fn from_str(text: &str) -> Result<Self> {
        let (pos, coins) =
            text.split_once(':').ok_or_else(|| Error::Parse(format!("initial state {text:?} needs 's,t:...'")))?;
        let (s, t) = pos.split_once(',').ok_or_else(|| Error::Parse(format!("bad initial position {pos:?}")))?;
        let parse_coord =
            |x: &str| x.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad coordinate {x:?}")));
        let site = Site::new(parse_coord(s)?, parse_coord(t)?);
        let mut coin = [ZERO; 4];
        let mut seen = [false; 4];
        for part in coins.split(',') {
            let (dir, value) =
                part.split_once('=').ok_or_else(|| Error::Parse(format!("bad coin component {part:?}")))?;
            let c = match dir.trim() {
                "L" => Direction::L,
                "D" => Direction::D,
                "U" => Direction::U,
                "R" => Direction::R,
                other => return Err(Error::Parse(format!("unknown direction {other:?}"))),
            };
            if seen[c.index()] {
                return Err(Error::Parse(format!("direction {} given twice", c.label())));
            }
            seen[c.index()] = true;
            coin[c.index()] = parse_complex(value)?;
        }
        let norm = coin.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > INITIAL_NORM_TOL {
            return Err(Error::Parse(format!("initial coin state has norm {norm}, expected 1")));
        }
        Ok(InitialState { site, coin, text: text.to_string() })
    }
}

/// Everything that determines one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec: LatticeSpec,
    pub coin: CoinOperator,
    pub coin_source: String,
    pub p: f64,
    pub steps: usize,
    pub mode: Mode,
    pub method: Method,
    pub trials: usize,
    pub seed: u64,
    pub initial: Option<InitialState>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

pub fn lattice_from_args(size: &str, boundary_s: &str, boundary_t: &str) -> Result<LatticeSpec> {
    let (m, n) = parse_size(size)?;
    LatticeSpec::new(m, n, boundary_s.parse::<Boundary>()?, boundary_t.parse::<Boundary>()?)
}

/// Coin from a registry name, or from a JSON file when `file` is given.
pub fn coin_from_args(name: &str, file: Option<&Path>) -> Result<(CoinOperator, String)> {
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)?;
        return Ok((CoinOperator::from_json(&text)?, format!("file:{}", path.display())));
    }
    let kind: CoinKind = name.parse()?;
    if kind == CoinKind::Custom {
        return Err(Error::Parse("custom coin requires --coin-file".into()));
    }
    Ok((CoinOperator::from_kind(kind)?, kind.as_str().to_string()))
}
