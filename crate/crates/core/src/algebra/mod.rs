//! Exact derivation of the effective radial Hamiltonian.
//!
//! Two independent routes are implemented. [`body`] works in body-frame Jacobi
//! coordinates, performs the angular reduction and the factorization of the
//! radial functions, and certifies that centrifugal singularities cancel.
//! [`pair`] derives the orientation-averaged quadratic form directly in
//! electron-nucleus distances and produces the perimetric terms used for
//! assembly. Tests compare the two.

pub mod body;
pub mod exchange;
pub mod hamiltonian;
pub mod pair;
pub mod poly;

use std::fmt;
use std::str::FromStr;

pub use exchange::project_exchange;
pub use hamiltonian::{EffectiveHamiltonian, OperatorTerm, Unknown, YzSymmetry};

use crate::error::{Error, Result};
use crate::systems::Species;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    /// Electron kinetic energy, coefficient 1.
    Electron,
    /// Nuclear kinetic energy, coefficient 1/mu12.
    Nuclear,
    /// Mass-polarization cross term, coefficient 1/mu0.
    SymmetryBreaking,
    /// Coulomb interaction, coefficient 1.
    Coulomb,
    /// Weight operator of the generalized problem.
    Overlap,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::Electron,
        Channel::Nuclear,
        Channel::SymmetryBreaking,
        Channel::Coulomb,
        Channel::Overlap,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Channel::Electron => "electron",
            Channel::Nuclear => "nuclear",
            Channel::SymmetryBreaking => "symbreak",
            Channel::Coulomb => "coulomb",
            Channel::Overlap => "overlap",
        }
    }
}

impl FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| Error::Parse(format!("unknown channel '{s}'")))
    }
}

/// Behaviour under exchange of the two nuclei (swap of `y` and `z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExchangeSector {
    /// No exchange symmetry (heteronuclear ion).
    None,
    /// Spatially symmetric states.
    Singlet,
    /// Spatially antisymmetric states.
    Triplet,
}

impl ExchangeSector {
    /// Eigenvalue of the exchange operator, `+1` or `-1`.
    pub fn parity(self) -> Option<i64> {
        match self {
            ExchangeSector::None => None,
            ExchangeSector::Singlet => Some(1),
            ExchangeSector::Triplet => Some(-1),
        }
    }

    /// The sector holding the levels of the ground electronic state:
    /// `(-1)^J` symmetry for homonuclear ions.
    pub fn natural(species: Species, j: u32) -> Self {
        if !species.is_homonuclear() {
            ExchangeSector::None
        } else if j.is_multiple_of(2) {
            ExchangeSector::Singlet
        } else {
            ExchangeSector::Triplet
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ExchangeSector::None => "none",
            ExchangeSector::Singlet => "singlet",
            ExchangeSector::Triplet => "triplet",
        }
    }
}

impl fmt::Display for ExchangeSector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ExchangeSector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(ExchangeSector::None),
            "singlet" => Ok(ExchangeSector::Singlet),
            "triplet" => Ok(ExchangeSector::Triplet),
            other => Err(Error::Parse(format!("unknown sector '{other}'"))),
        }
    }
}

/// Derive the effective Hamiltonian for a species class, `J` and exchange sector.
pub fn derive(j: u32, homonuclear: bool, sector: ExchangeSector) -> Result<EffectiveHamiltonian> {
    if j > 2 {
        return Err(Error::UnsupportedSymmetry { j });
    }
    // certify the centrifugal cancellation on the body-frame route
    body::factorize(&body::angular_reduce(j)?)?;
    let full = pair::derive_full(j)?;
    if !homonuclear {
        if sector != ExchangeSector::None {
            return Err(Error::InvalidSector(format!(
                "{sector} requested for a heteronuclear ion"
            )));
        }
        return Ok(full);
    }
    project_exchange(&full, sector)
}
