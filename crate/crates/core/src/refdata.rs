//! Bundled reference levels, result files and comparisons.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::algebra::ExchangeSector;
use crate::error::{Error, Result};
use crate::systems::Species;

/// The bundled reference table.
pub const BUNDLED_REFERENCE: &str = include_str!("../data/reference.csv");

/// SHA-256 of [`BUNDLED_REFERENCE`].
pub const REFERENCE_SHA256: &str =
    "c8574314c3e21b217aad2366d4bb3f8facfe49f37ad807c8a29d5efbc038f084";

const REFERENCE_HEADER: &str = "species,J,v,energy_au,source,sens_lambda,sens_mu,flag";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    ThisWork,
    Moss,
}

impl Source {
    fn tag(self) -> &'static str {
        match self {
            Source::ThisWork => "this_paper",
            Source::Moss => "moss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    Ok,
    Moss,
    NoBound,
    /// Energy present, sensitivity not tabulated.
    Blank,
}

impl Flag {
    fn tag(self) -> &'static str {
        match self {
            Flag::Ok => "ok",
            Flag::Moss => "moss",
            Flag::NoBound => "nobound",
            Flag::Blank => "blank",
        }
    }
}

impl FromStr for Flag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(Flag::Ok),
            "moss" => Ok(Flag::Moss),
            "nobound" => Ok(Flag::NoBound),
            "blank" => Ok(Flag::Blank),
            other => Err(Error::Parse(format!("unknown flag '{other}'"))),
        }
    }
}

/// A number kept together with its printed form, so files round-trip exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Printed {
    pub value: f64,
    pub text: String,
}

impl Printed {
    fn parse(text: &str) -> Result<Self> {
        let value = text
            .parse()
            .map_err(|_| Error::Parse(format!("bad number '{text}'")))?;
        Ok(Self {
            value,
            text: text.to_string(),
        })
    }

    /// Number of printed decimals.
    pub fn decimals(&self) -> u32 {
        self.text.split_once('.').map_or(0, |(_, d)| d.len() as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEntry {
    pub species: Species,
    pub j: u32,
    pub v: usize,
    pub energy: Option<Printed>,
    pub source: Option<Source>,
    pub sens_lambda: Option<Printed>,
    pub sens_mu: Option<Printed>,
    pub flag: Flag,
}

fn optional(field: &str) -> Result<Option<Printed>> {
    if field.is_empty() {
        Ok(None)
    } else {
        Printed::parse(field).map(Some)
    }
}

fn parse_entry(line: &str) -> Result<ReferenceEntry> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 8 {
        return Err(Error::Parse(format!(
            "expected 8 fields, found {}",
            f.len()
        )));
    }
    let int = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Parse(format!("bad {what} '{s}'")))
    };
    let source = match f[4] {
        "" => None,
        "this_paper" => Some(Source::ThisWork),
        "moss" => Some(Source::Moss),
        other => return Err(Error::Parse(format!("unknown source '{other}'"))),
    };
    let e = ReferenceEntry {
        species: f[0].parse()?,
        j: int(f[1], "J")? as u32,
        v: int(f[2], "v")?,
        energy: optional(f[3])?,
        source,
        sens_lambda: optional(f[5])?,
        sens_mu: optional(f[6])?,
        flag: f[7].parse()?,
    };
    let consistent = match e.flag {
        Flag::NoBound => e.energy.is_none() && e.source.is_none(),
        Flag::Moss => e.energy.is_some() && e.source == Some(Source::Moss),
        Flag::Ok => {
            e.energy.is_some() && e.source == Some(Source::ThisWork) && e.sens_lambda.is_some()
        }
        Flag::Blank => e.energy.is_some() && e.sens_lambda.is_none(),
    };
    if !consistent {
        return Err(Error::Parse(format!(
            "fields inconsistent with flag {}",
            e.flag.tag()
        )));
    }
    Ok(e)
}

/// Parse a reference CSV. Errors carry the 1-based row number.
pub fn parse_reference(text: &str) -> Result<Vec<ReferenceEntry>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == REFERENCE_HEADER => {}
        _ => {
            return Err(Error::Reference {
                row: 1,
                message: format!("header must be '{REFERENCE_HEADER}'"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_entry(l).map_err(|e| Error::Reference {
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn ingest_reference(path: &Path) -> Result<Vec<ReferenceEntry>> {
    parse_reference(&std::fs::read_to_string(path)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// The bundled table, after checking its checksum.
pub fn bundled() -> Result<Vec<ReferenceEntry>> {
    let got = sha256_hex(BUNDLED_REFERENCE.as_bytes());
    if got != REFERENCE_SHA256 {
        return Err(Error::Reference {
            row: 0,
            message: format!("bundled table checksum {got} does not match"),
        });
    }
    parse_reference(BUNDLED_REFERENCE)
}

pub fn write_reference(entries: &[ReferenceEntry]) -> String {
    let text = |p: &Option<Printed>| p.as_ref().map_or("", |p| p.text.as_str()).to_string();
    let mut out = format!("{REFERENCE_HEADER}\n");
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.species,
            e.j,
            e.v,
            text(&e.energy),
            e.source.map_or("", Source::tag),
            text(&e.sens_lambda),
            text(&e.sens_mu),
            e.flag.tag()
        );
    }
    out
}

/// Per species: energies from this work, and those printed to at least 12 decimals.
pub fn precision_counts(entries: &[ReferenceEntry]) -> BTreeMap<Species, (usize, usize)> {
    let mut out = BTreeMap::new();
    for e in entries {
        if e.source != Some(Source::ThisWork) {
            continue;
        }
        let c = out.entry(e.species).or_insert((0, 0));
        c.0 += 1;
        if e.energy.as_ref().is_some_and(|p| p.decimals() >= 12) {
            c.1 += 1;
        }
    }
    out
}

/// One computed level, as written to result files.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub species: Species,
    pub j: u32,
    pub sector: ExchangeSector,
    pub v: usize,
    pub energy: f64,
    pub residual: f64,
    pub converged_digits: Option<u32>,
    pub sens_lambda: Option<f64>,
    pub sens_mu: Option<f64>,
}

const RESULT_HEADER: &str =
    "species,J,sector,v,energy_au,residual,converged_digits,sens_lambda,sens_mu";

/// Results as CSV. `provenance` lines are written first, prefixed with `# `.
pub fn write_results(provenance: &[String], rows: &[ResultRow]) -> String {
    let mut out = String::new();
    for p in provenance {
        let _ = writeln!(out, "# {p}");
    }
    let _ = writeln!(out, "{RESULT_HEADER}");
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.8}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.14},{:.3e},{},{},{}",
            r.species,
            r.j,
            r.sector,
            r.v,
            r.energy,
            r.residual,
            r.converged_digits.map_or(String::new(), |d| d.to_string()),
            opt(r.sens_lambda),
            opt(r.sens_mu)
        );
    }
    out
}

pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != RESULT_HEADER {
                return Err(Error::Reference {
                    row: i + 1,
                    message: "missing results header".into(),
                });
            }
            seen_header = true;
            continue;
        }
        let row = (|| -> Result<ResultRow> {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(Error::Parse(format!(
                    "expected 9 fields, found {}",
                    f.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Parse(format!("bad number '{s}'")))
            };
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    num(s).map(Some)
                }
            };
            Ok(ResultRow {
                species: f[0].parse()?,
                j: num(f[1])? as u32,
                sector: f[2].parse()?,
                v: num(f[3])? as usize,
                energy: num(f[4])?,
                residual: num(f[5])?,
                converged_digits: opt(f[6])?.map(|d| d as u32),
                sens_lambda: opt(f[7])?,
                sens_mu: opt(f[8])?,
            })
        })()
        .map_err(|e| Error::Reference {
            row: i + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// No reference level for this (species, J, v).
    Uncovered,
    /// A bound level was computed where the reference has none.
    SpuriousBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub species: Species,
    pub j: u32,
    pub v: usize,
    pub computed: f64,
    pub reference: Option<f64>,
    pub delta: Option<f64>,
    pub matched_digits: Option<u32>,
    pub tolerance: f64,
    pub status: Status,
}

/// Compare computed levels with the reference. The tolerance of each level is
/// `tolerance`, loosened to half a unit in the last printed decimal.
pub fn compare(
    results: &[ResultRow],
    reference: &[ReferenceEntry],
    tolerance: f64,
) -> Vec<Deviation> {
    let index: BTreeMap<(Species, u32, usize), &ReferenceEntry> = reference
        .iter()
        .map(|e| ((e.species, e.j, e.v), e))
        .collect();
    results
        .iter()
        .map(|r| {
            let entry = index.get(&(r.species, r.j, r.v));
            let mut d = Deviation {
                species: r.species,
                j: r.j,
                v: r.v,
                computed: r.energy,
                reference: None,
                delta: None,
                matched_digits: None,
                tolerance,
                status: Status::Uncovered,
            };
            match entry {
                None => {}
                Some(e) if e.flag == Flag::NoBound => d.status = Status::SpuriousBound,
                Some(e) => {
                    let p = e.energy.as_ref().expect("bound entries carry an energy");
                    let delta = r.energy - p.value;
                    let tol = tolerance.max(0.5 * 10f64.powi(-(p.decimals() as i32)));
                    d.reference = Some(p.value);
                    d.delta = Some(delta);
                    d.matched_digits = Some(matched_digits(delta, p.decimals()));
                    d.tolerance = tol;
                    d.status = if delta.abs() <= tol * (1.0 + 1e-9) {
                        Status::Pass
                    } else {
                        Status::Fail
                    };
                }
            }
            d
        })
        .collect()
}

/// Decimals in agreement, at most the printed precision.
pub fn matched_digits(delta: f64, printed: u32) -> u32 {
    if delta == 0.0 {
        return printed;
    }
    ((-delta.abs().log10()).floor().max(0.0) as u32).min(printed)
}
