//! Effective Hamiltonian in perimetric coordinates and its text serialization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigInt;

use super::poly::Rational;
use super::{Channel, ExchangeSector};
use crate::error::{Error, Result};

const FORMAT_HEADER: &str = "# effective-hamiltonian v1";

/// Restriction of a radial unknown under `y <-> z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum YzSymmetry {
    None,
    Symmetric,
    Antisymmetric,
}

impl YzSymmetry {
    pub fn tag(self) -> &'static str {
        match self {
            YzSymmetry::None => "none",
            YzSymmetry::Symmetric => "symmetric",
            YzSymmetry::Antisymmetric => "antisymmetric",
        }
    }
}

impl FromStr for YzSymmetry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(YzSymmetry::None),
            "symmetric" => Ok(YzSymmetry::Symmetric),
            "antisymmetric" => Ok(YzSymmetry::Antisymmetric),
            _ => Err(Error::Parse(format!("unknown yz symmetry '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unknown {
    pub name: String,
    pub yz: YzSymmetry,
}

impl Unknown {
    pub fn full(k: usize) -> Self {
        Self {
            name: ["F", "G", "H"][k].to_string(),
            yz: YzSymmetry::None,
        }
    }
}

/// One monomial term `coeff * <d^left f_row | x^a y^b z^c | d^right (S^swap g_col)>`.
///
/// `left`/`right` are axis indices (0 = x, 1 = y, 2 = z) of a first derivative,
/// or `None`. With `swap` set, the right-hand function is evaluated with `y` and
/// `z` exchanged and the right derivative acts on that exchanged function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OperatorTerm {
    pub row: usize,
    pub col: usize,
    pub channel: Channel,
    pub swap: bool,
    pub exps: [u32; 3],
    pub left: Option<u8>,
    pub right: Option<u8>,
    pub coeff: Rational,
}

pub(crate) fn swap_axis(a: Option<u8>) -> Option<u8> {
    a.map(|x| match x {
        1 => 2,
        2 => 1,
        o => o,
    })
}

impl OperatorTerm {
    /// A derivative on an axis must be paired with at least one power of that
    /// coordinate, otherwise the one-dimensional factor is not banded.
    pub fn check_banded(&self) -> Result<()> {
        for d in [self.left, self.right].into_iter().flatten() {
            if self.exps[d as usize] == 0 {
                return Err(Error::NonBanded(format!("{self:?}")));
            }
        }
        Ok(())
    }

    /// Half-bandwidth of the one-dimensional factor along each axis.
    pub fn half_bandwidths(&self) -> [u32; 3] {
        self.exps
    }

    /// The term obtained by formally transposing the bilinear form.
    pub fn transpose(&self) -> Self {
        if self.swap {
            Self {
                row: self.col,
                col: self.row,
                exps: [self.exps[0], self.exps[2], self.exps[1]],
                left: swap_axis(self.right),
                right: swap_axis(self.left),
                ..self.clone()
            }
        } else {
            Self {
                row: self.col,
                col: self.row,
                left: self.right,
                right: self.left,
                ..self.clone()
            }
        }
    }

    fn key(
        &self,
    ) -> (
        usize,
        usize,
        Channel,
        bool,
        [u32; 3],
        Option<u8>,
        Option<u8>,
    ) {
        (
            self.row,
            self.col,
            self.channel,
            self.swap,
            self.exps,
            self.left,
            self.right,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectiveHamiltonian {
    pub j: u32,
    pub sector: ExchangeSector,
    pub unknowns: Vec<Unknown>,
    pub terms: Vec<OperatorTerm>,
}

/// Structurally nonzero offsets and their counts under several conventions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingOffsets {
    /// Offsets `(dx, dy, dz, row, col)` over all block pairs.
    pub offsets: BTreeSet<(i32, i32, i32, usize, usize)>,
    /// Distinct `(dx, dy, dz)` regardless of blocks.
    pub distinct: usize,
    /// Sum over row blocks of the distinct offsets reaching that row.
    pub per_row_block: usize,
    /// Total over block pairs.
    pub per_block_pair: usize,
}

impl EffectiveHamiltonian {
    pub fn n_unknowns(&self) -> usize {
        self.unknowns.len()
    }

    pub fn terms_for(&self, ch: Channel) -> impl Iterator<Item = &OperatorTerm> {
        self.terms.iter().filter(move |t| t.channel == ch)
    }

    /// Largest monomial exponent per axis, which bounds the stencil degrees needed.
    pub fn max_degree(&self) -> u32 {
        self.terms
            .iter()
            .flat_map(|t| t.exps.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Every term has its formal transpose in the list with the same coefficient.
    pub fn is_transpose_closed(&self) -> bool {
        let map: BTreeMap<_, _> = self.terms.iter().map(|t| (t.key(), &t.coeff)).collect();
        self.terms
            .iter()
            .all(|t| map.get(&t.transpose().key()) == Some(&&t.coeff))
    }

    /// Offsets implied by the term list. The swap flag is ignored here: it
    /// relabels the right index, and the offsets are measured against the
    /// relabelled index as in assembly.
    pub fn coupling_offsets(&self) -> CouplingOffsets {
        let mut offsets = BTreeSet::new();
        for t in &self.terms {
            let [a, b, c] = t.half_bandwidths().map(|v| v as i32);
            for dx in -a..=a {
                for dy in -b..=b {
                    for dz in -c..=c {
                        offsets.insert((dx, dy, dz, t.row, t.col));
                    }
                }
            }
        }
        let distinct: BTreeSet<_> = offsets.iter().map(|o| (o.0, o.1, o.2)).collect();
        let mut per_row: BTreeMap<usize, BTreeSet<(i32, i32, i32)>> = BTreeMap::new();
        for o in &offsets {
            per_row.entry(o.3).or_default().insert((o.0, o.1, o.2));
        }
        CouplingOffsets {
            distinct: distinct.len(),
            per_row_block: per_row.values().map(|s| s.len()).sum(),
            per_block_pair: offsets.len(),
            offsets,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let axis = |a: Option<u8>| match a {
            None => "-",
            Some(0) => "x",
            Some(1) => "y",
            _ => "z",
        };
        writeln!(s, "{FORMAT_HEADER}").unwrap();
        writeln!(s, "j {}", self.j).unwrap();
        writeln!(s, "sector {}", self.sector).unwrap();
        for u in &self.unknowns {
            writeln!(s, "unknown {} {}", u.name, u.yz.tag()).unwrap();
        }
        for t in &self.terms {
            writeln!(
                s,
                "term {} {} {} {} {} {} {} {} {} {}/{}",
                t.row,
                t.col,
                t.channel.tag(),
                t.swap as u8,
                t.exps[0],
                t.exps[1],
                t.exps[2],
                axis(t.left),
                axis(t.right),
                t.coeff.numer(),
                t.coeff.denom()
            )
            .unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |n: usize, m: &str| Error::Parse(format!("line {}: {m}", n + 1));
        match lines.next() {
            Some((_, l)) if l.trim() == FORMAT_HEADER => {}
            _ => return Err(bad(0, "missing or unsupported format header")),
        }
        let mut j = None;
        let mut sector = None;
        let mut unknowns = Vec::new();
        let mut terms = Vec::new();
        let axis = |s: &str, n: usize| -> Result<Option<u8>> {
            match s {
                "-" => Ok(None),
                "x" => Ok(Some(0)),
                "y" => Ok(Some(1)),
                "z" => Ok(Some(2)),
                _ => Err(bad(n, "bad derivative axis")),
            }
        };
        for (n, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.first().copied() {
                None => continue,
                Some("j") if f.len() == 2 => {
                    j = Some(f[1].parse().map_err(|_| bad(n, "bad J"))?);
                }
                Some("sector") if f.len() == 2 => sector = Some(f[1].parse()?),
                Some("unknown") if f.len() == 3 => unknowns.push(Unknown {
                    name: f[1].to_string(),
                    yz: f[2].parse()?,
                }),
                Some("term") if f.len() == 11 => {
                    let num =
                        |s: &str| -> Result<usize> { s.parse().map_err(|_| bad(n, "bad integer")) };
                    let (p, q) = f[10]
                        .split_once('/')
                        .ok_or_else(|| bad(n, "bad coefficient"))?;
                    let p = BigInt::from_str(p).map_err(|_| bad(n, "bad numerator"))?;
                    let q = BigInt::from_str(q).map_err(|_| bad(n, "bad denominator"))?;
                    terms.push(OperatorTerm {
                        row: num(f[1])?,
                        col: num(f[2])?,
                        channel: f[3].parse()?,
                        swap: num(f[4])? != 0,
                        exps: [num(f[5])? as u32, num(f[6])? as u32, num(f[7])? as u32],
                        left: axis(f[8], n)?,
                        right: axis(f[9], n)?,
                        coeff: Rational::new(p, q),
                    });
                }
                _ => return Err(bad(n, "unrecognized line")),
            }
        }
        Ok(Self {
            j: j.ok_or_else(|| bad(0, "missing J"))?,
            sector: sector.ok_or_else(|| bad(0, "missing sector"))?,
            unknowns,
            terms,
        })
    }

    pub fn cache_path(dir: &Path, j: u32, homonuclear: bool, sector: ExchangeSector) -> PathBuf {
        let class = if homonuclear { "homo" } else { "hetero" };
        dir.join(format!("heff_j{j}_{class}_{sector}.txt"))
    }

    /// Load a cached derivation, deriving and writing it if absent.
    pub fn load_or_derive(
        dir: &Path,
        j: u32,
        homonuclear: bool,
        sector: ExchangeSector,
    ) -> Result<Self> {
        let path = Self::cache_path(dir, j, homonuclear, sector);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(h) = Self::from_text(&text) {
                if h.j == j && h.sector == sector {
                    return Ok(h);
                }
            }
        }
        let h = super::derive(j, homonuclear, sector)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, h.to_text())?;
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        for j in 0..=2 {
            let h = crate::algebra::derive(j, false, ExchangeSector::None).unwrap();
            let text = h.to_text();
            let back = EffectiveHamiltonian::from_text(&text).unwrap();
            assert_eq!(back, h);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn malformed_text_is_rejected() {
        assert!(EffectiveHamiltonian::from_text("j 0\n").is_err());
        let bad = format!("{FORMAT_HEADER}\nj 0\nsector none\nterm 0 0 nope 0 1 1 1 - - 1/1\n");
        assert!(EffectiveHamiltonian::from_text(&bad).is_err());
    }

    #[test]
    fn derived_forms_are_transpose_closed() {
        for j in 0..=2 {
            let h = crate::algebra::derive(j, false, ExchangeSector::None).unwrap();
            assert!(h.is_transpose_closed(), "J={j}");
        }
    }
}
