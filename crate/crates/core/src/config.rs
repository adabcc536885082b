//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::algebra::ExchangeSector;
use crate::error::{Error, Result};
use crate::sturmian::ScaleParams;
use crate::systems::{Species, MD_OVER_ME, MP_OVER_ME};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub species: Species,
    pub j: u32,
    /// Exchange sector; defaults to the natural one of `(species, j)`.
    pub sector: Option<ExchangeSector>,
    pub n: u32,
    pub n_x: u32,
    pub alpha: f64,
    pub beta: f64,
    /// Number of levels requested from the solver.
    pub levels: usize,
    /// Solve in shifted mode around this energy instead of the window mode.
    pub shift: Option<f64>,
    /// Re-solve every level with a shift placed just below it.
    pub refine: bool,
    pub sensitivities: bool,
    /// Also compute finite-difference sensitivities and report the gap.
    pub fd_check: bool,
    /// Solve again at `N - 2` to estimate converged digits.
    pub digits_check: bool,
    pub mp_over_me: f64,
    pub md_over_me: f64,
    pub seed: u64,
    pub tolerance: f64,
    pub output: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

/// Scale parameters for a basis of size `n`. Scans at `N = 28..60` put the best
/// `beta` near `N/3` for `J = 0, 1` and near `3N/7` for `J = 2`, with `alpha = 2`.
pub fn default_scales(j: u32, n: u32) -> ScaleParams {
    let slope = if j == 2 { 3.0 / 7.0 } else { 1.0 / 3.0 };
    let beta = (slope * n as f64).max(3.0);
    ScaleParams { alpha: 2.0, beta }
}

const KEYS: [&str; 19] = [
    "species",
    "J",
    "sector",
    "N",
    "N_x",
    "alpha",
    "beta",
    "levels",
    "shift",
    "refine",
    "sensitivities",
    "fd_check",
    "digits_check",
    "mp_over_me",
    "md_over_me",
    "seed",
    "tolerance",
    "output",
    "cache_dir",
];

impl RunConfig {
    /// Defaults for everything but the species, `J` and `N`.
    pub fn new(species: Species, j: u32, n: u32) -> Self {
        let s = default_scales(j, n);
        Self {
            species,
            j,
            sector: None,
            n,
            n_x: n.min(12),
            alpha: s.alpha,
            beta: s.beta,
            levels: 20,
            shift: None,
            refine: false,
            sensitivities: false,
            fd_check: false,
            digits_check: true,
            mp_over_me: MP_OVER_ME,
            md_over_me: MD_OVER_ME,
            seed: 0x5eed,
            tolerance: 1e-10,
            output: None,
            cache_dir: None,
        }
    }

    /// Parse a configuration file, then apply `key=value` overrides in order.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let location = format!("line {}", i + 1);
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                location: location.clone(),
                message: format!("expected key = value, got '{line}'"),
            })?;
            pairs.push((location, k.trim().to_string(), v.trim().to_string()));
        }
        for (i, o) in overrides.iter().enumerate() {
            let location = format!("override {}", i + 1);
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config {
                location: location.clone(),
                message: format!("expected key=value, got '{o}'"),
            })?;
            pairs.push((location, k.trim().to_string(), v.trim().to_string()));
        }
        let find = |key: &str| pairs.iter().rev().find(|(_, k, _)| k == key);
        let required = |key: &str| {
            find(key).ok_or_else(|| Error::Config {
                location: "config".into(),
                message: format!("missing required key '{key}'"),
            })
        };
        let (loc, _, v) = required("species")?;
        let species: Species = v.parse().map_err(|e: Error| cfg_err(loc, "species", e))?;
        let (loc, _, v) = required("J")?;
        let j = parse_value(loc, "J", v)?;
        let (loc, _, v) = required("N")?;
        let n = parse_value(loc, "N", v)?;
        let mut c = RunConfig::new(species, j, n);
        for (loc, k, v) in &pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config {
                    location: loc.clone(),
                    message: format!("unknown key '{k}'"),
                });
            }
            if v.is_empty() {
                return Err(Error::Config {
                    location: loc.clone(),
                    message: format!("empty value for key '{k}'"),
                });
            }
            match k.as_str() {
                "species" | "J" | "N" => {}
                "sector" => c.sector = Some(v.parse().map_err(|e: Error| cfg_err(loc, k, e))?),
                "N_x" => c.n_x = parse_value(loc, k, v)?,
                "alpha" => c.alpha = parse_value(loc, k, v)?,
                "beta" => c.beta = parse_value(loc, k, v)?,
                "levels" => c.levels = parse_value(loc, k, v)?,
                "shift" => c.shift = Some(parse_value(loc, k, v)?),
                "refine" => c.refine = parse_value(loc, k, v)?,
                "sensitivities" => c.sensitivities = parse_value(loc, k, v)?,
                "fd_check" => c.fd_check = parse_value(loc, k, v)?,
                "digits_check" => c.digits_check = parse_value(loc, k, v)?,
                "mp_over_me" => c.mp_over_me = parse_value(loc, k, v)?,
                "md_over_me" => c.md_over_me = parse_value(loc, k, v)?,
                "seed" => c.seed = parse_value(loc, k, v)?,
                "tolerance" => c.tolerance = parse_value(loc, k, v)?,
                "output" => c.output = Some(PathBuf::from(v)),
                "cache_dir" => c.cache_dir = Some(PathBuf::from(v)),
                _ => unreachable!(),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                location: "config".into(),
                message: format!("{key}: {message}"),
            })
        };
        if self.j > 2 {
            return bad("J", format!("only J <= 2 is supported, got {}", self.j));
        }
        if self.n_x > self.n {
            return bad("N_x", format!("N_x = {} exceeds N = {}", self.n_x, self.n));
        }
        for (k, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("mp_over_me", self.mp_over_me),
            ("md_over_me", self.md_over_me),
            ("tolerance", self.tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(k, format!("must be positive, got {v}"));
            }
        }
        if self.levels == 0 {
            return bad("levels", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn scales(&self) -> ScaleParams {
        ScaleParams {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    /// Canonical text of every setting, used for hashing.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "species = {}", self.species);
        let _ = writeln!(s, "J = {}", self.j);
        if let Some(sec) = self.sector {
            let _ = writeln!(s, "sector = {sec}");
        }
        let _ = writeln!(s, "N = {}", self.n);
        let _ = writeln!(s, "N_x = {}", self.n_x);
        let _ = writeln!(s, "alpha = {:?}", self.alpha);
        let _ = writeln!(s, "beta = {:?}", self.beta);
        let _ = writeln!(s, "levels = {}", self.levels);
        if let Some(x) = self.shift {
            let _ = writeln!(s, "shift = {x:?}");
        }
        let _ = writeln!(s, "refine = {}", self.refine);
        let _ = writeln!(s, "sensitivities = {}", self.sensitivities);
        let _ = writeln!(s, "fd_check = {}", self.fd_check);
        let _ = writeln!(s, "digits_check = {}", self.digits_check);
        let _ = writeln!(s, "mp_over_me = {:?}", self.mp_over_me);
        let _ = writeln!(s, "md_over_me = {:?}", self.md_over_me);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "tolerance = {:?}", self.tolerance);
        if let Some(p) = &self.output {
            let _ = writeln!(s, "output = {}", p.display());
        }
        if let Some(p) = &self.cache_dir {
            let _ = writeln!(s, "cache_dir = {}", p.display());
        }
        s
    }
}

fn cfg_err(location: &str, key: &str, e: Error) -> Error {
    Error::Config {
        location: location.to_string(),
        message: format!("{key}: {e}"),
    }
}

fn parse_value<T: std::str::FromStr>(location: &str, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config {
        location: location.to_string(),
        message: format!("invalid value '{v}' for key '{key}'"),
    })
}
