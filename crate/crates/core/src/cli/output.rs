use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::PositionDistribution;

pub const SCHEMA: u32 = 1;

/// Run description written next to every result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub lattice: String,
    pub coin: String,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attractor_dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completeness: Option<String>,
}

impl Metadata {
    pub fn new(command: &str, lattice: String, coin: String, p: f64) -> Self {
        Metadata {
            schema: SCHEMA,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            lattice,
            coin,
            p,
            mode: None,
            steps: None,
            trials: None,
            seed: None,
            initial: None,
            method: None,
            attractor_dimension: None,
            completeness: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distribution {
    pub m: usize,
    pub n: usize,
    /// `P(s, t)` in site order `s * N + t`.
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub schema: u32,
    pub metadata: Metadata,
    pub distribution: Distribution,
}

impl ResultFile {
    pub fn new(metadata: Metadata, dist: &PositionDistribution, stderr: Option<Vec<f64>>) -> Self {
        ResultFile {
            schema: SCHEMA,
            metadata,
            distribution: Distribution { m: dist.m(), n: dist.n(), p: dist.as_slice().to_vec(), stderr },
        }
    }

    pub fn distribution(&self) -> Result<PositionDistribution> {
        PositionDistribution::new(self.distribution.m, self.distribution.n, self.distribution.p.clone())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ResultFile = serde_json::from_str(&text)?;
        if file.schema != SCHEMA {
            return Err(Error::Parse(format!("unsupported schema {}", file.schema)));
        }
        Ok(file)
    }
}

/// `s,t,P[,stderr]` rows in site order, 17 significant digits.
pub fn to_csv(dist: &PositionDistribution, stderr: Option<&[f64]>) -> String {
    let mut out = String::from(if stderr.is_some() { "s,t,P,stderr\n" } else { "s,t,P\n" });
    for s in 0..dist.m() {
        for t in 0..dist.n() {
            let k = s * dist.n() + t;
            let _ = write!(out, "{s},{t},{:.16e}", dist.as_slice()[k]);
            if let Some(e) = stderr {
                let _ = write!(out, ",{:.16e}", e[k]);
            }
            out.push('\n');
        }
    }
    out
}

/// Parses the CSV written by [`to_csv`].
pub fn from_csv(text: &str) -> Result<(PositionDistribution, Option<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
    let with_err = match header {
        "s,t,P" => false,
        "s,t,P,stderr" => true,
        other => return Err(Error::Parse(format!("unexpected csv header {other:?}"))),
    };
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != if with_err { 4 } else { 3 } {
            return Err(Error::Parse(format!("bad csv row {line:?}")));
        }
        let num = |x: &str| x.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {x:?}")));
        let idx = |x: &str| x.parse::<usize>().map_err(|_| Error::Parse(format!("bad index {x:?}")));
        rows.push((idx(cols[0])?, idx(cols[1])?, num(cols[2])?, if with_err { num(cols[3])? } else { 0.0 }));
    }
    let m = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let n = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    if rows.len() != m * n {
        return Err(Error::Parse("csv rows do not cover the lattice".into()));
    }
    let mut p = vec![0.0; m * n];
    let mut e = vec![0.0; m * n];
    for (s, t, v, err) in rows {
        p[s * n + t] = v;
        e[s * n + t] = err;
    }
    Ok((PositionDistribution::new(m, n, p)?, with_err.then_some(e)))
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Writes a distribution as CSV (plus a metadata sidecar when writing to a
/// file) or as a single JSON document.
pub fn write_distribution(
    out: Option<&Path>,
    format: super::config::Format,
    metadata: Metadata,
    dist: &PositionDistribution,
    stderr: Option<Vec<f64>>,
) -> Result<()> {
    match format {
        super::config::Format::Csv => {
            write_text(out, &to_csv(dist, stderr.as_deref()))?;
            if let Some(path) = out {
                std::fs::write(meta_path(path), to_json_string(&metadata)?)?;
            }
        }
        super::config::Format::Json => {
            write_text(out, &to_json_string(&ResultFile::new(metadata, dist, stderr))?)?;
        }
    }
    Ok(())
}

pub fn write_json_value(out: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    write_text(out, &to_json_string(value)?)
}
