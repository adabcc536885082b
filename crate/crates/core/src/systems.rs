//! Physical constants and mass configurations of the three ion species.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MP_OVER_ME: f64 = 1836.15267261;
pub const MD_OVER_ME: f64 = 3670.4829652;
pub const HARTREE_IN_CM1: f64 = 219474.6313705;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Species {
    H2Plus,
    D2Plus,
    HDPlus,
}

impl Species {
    pub const ALL: [Species; 3] = [Species::H2Plus, Species::D2Plus, Species::HDPlus];

    pub fn label(self) -> &'static str {
        match self {
            Species::H2Plus => "h2+",
            Species::D2Plus => "d2+",
            Species::HDPlus => "hd+",
        }
    }

    pub fn is_homonuclear(self) -> bool {
        self != Species::HDPlus
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Species {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "h2+" | "h2plus" => Ok(Species::H2Plus),
            "d2+" | "d2plus" => Ok(Species::D2Plus),
            "hd+" | "hdplus" => Ok(Species::HDPlus),
            other => Err(Error::Parse(format!("unknown species '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassRatios {
    pub mp_over_me: f64,
    pub md_over_me: f64,
    pub source_label: String,
}

impl Default for MassRatios {
    fn default() -> Self {
        Self {
            mp_over_me: MP_OVER_ME,
            md_over_me: MD_OVER_ME,
            source_label: "CODATA 2002".to_string(),
        }
    }
}

impl MassRatios {
    pub fn new(mp_over_me: f64, md_over_me: f64, source_label: &str) -> Result<Self> {
        for (name, m) in [("mp_over_me", mp_over_me), ("md_over_me", md_over_me)] {
            if !(m.is_finite() && m > 1.0) {
                return Err(Error::Domain(format!("{name} must exceed 1, got {m}")));
            }
        }
        Ok(Self {
            mp_over_me,
            md_over_me,
            source_label: source_label.to_string(),
        })
    }
}

/// Nuclear masses of one species, in units of the electron mass.
/// For HD+ nucleus 1 is the proton and nucleus 2 the deuteron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpec {
    pub species: Species,
    pub m1_over_me: f64,
    pub m2_over_me: f64,
    pub homonuclear: bool,
}

impl SystemSpec {
    pub fn new(species: Species, masses: &MassRatios) -> Self {
        let (m1, m2) = match species {
            Species::H2Plus => (masses.mp_over_me, masses.mp_over_me),
            Species::D2Plus => (masses.md_over_me, masses.md_over_me),
            Species::HDPlus => (masses.mp_over_me, masses.md_over_me),
        };
        Self {
            species,
            m1_over_me: m1,
            m2_over_me: m2,
            homonuclear: species.is_homonuclear(),
        }
    }

    pub fn codata2002(species: Species) -> Self {
        Self::new(species, &MassRatios::default())
    }

    /// The lowest dissociation threshold. For HD+ this is the D + H+ limit.
    pub fn dissociation_threshold(&self) -> f64 {
        let heavier = self.m1_over_me.max(self.m2_over_me);
        dissociation_limit(heavier).expect("masses are positive")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedMasses {
    pub mu12: f64,
    pub inv_mu0: f64,
}

impl ReducedMasses {
    pub fn inv_mu12(&self) -> f64 {
        1.0 / self.mu12
    }
}

pub fn reduced_masses(spec: &SystemSpec) -> ReducedMasses {
    let (m1, m2) = (spec.m1_over_me, spec.m2_over_me);
    let inv_mu0 = if spec.homonuclear {
        0.0
    } else {
        1.0 / m1 - 1.0 / m2
    };
    ReducedMasses {
        mu12: m1 * m2 / (m1 + m2),
        inv_mu0,
    }
}

/// Energy of a hydrogen-like atom with the given nuclear mass, in hartree.
pub fn dissociation_limit(nucleus_mass_over_me: f64) -> Result<f64> {
    if !(nucleus_mass_over_me > 0.0) {
        return Err(Error::Domain(format!(
            "nuclear mass must be positive, got {nucleus_mass_over_me}"
        )));
    }
    Ok(-0.5 / (1.0 + 1.0 / nucleus_mass_over_me))
}

pub fn to_wavenumbers(e_hartree: f64) -> f64 {
    e_hartree * HARTREE_IN_CM1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_masses_h2() {
        let rm = reduced_masses(&SystemSpec::codata2002(Species::H2Plus));
        assert!((rm.mu12 - 918.076336305).abs() < 1e-9);
        assert_eq!(rm.inv_mu0, 0.0);
    }

    #[test]
    fn reduced_masses_hd() {
        let rm = reduced_masses(&SystemSpec::codata2002(Species::HDPlus));
        let expected = 1.0 / MP_OVER_ME - 1.0 / MD_OVER_ME;
        assert_eq!(rm.inv_mu0, expected);
        assert!((rm.inv_mu0 - 2.72173e-4).abs() < 1e-9);
    }

    #[test]
    fn swap_symmetry() {
        let a = SystemSpec {
            species: Species::HDPlus,
            m1_over_me: MP_OVER_ME,
            m2_over_me: MD_OVER_ME,
            homonuclear: false,
        };
        let b = SystemSpec {
            m1_over_me: MD_OVER_ME,
            m2_over_me: MP_OVER_ME,
            ..a
        };
        let (ra, rb) = (reduced_masses(&a), reduced_masses(&b));
        assert!((ra.mu12 - rb.mu12).abs() < 1e-12);
        assert_eq!(ra.inv_mu0, -rb.inv_mu0);
    }

    #[test]
    fn dissociation_limits() {
        assert!((dissociation_limit(MP_OVER_ME).unwrap() + 0.49972783971226).abs() < 5e-15);
        assert!((dissociation_limit(MD_OVER_ME).unwrap() + 0.49986381524721).abs() < 5e-15);
        assert!((dissociation_limit(1e300).unwrap() + 0.5).abs() < 1e-15);
        assert!(dissociation_limit(0.0).is_err());
        assert!(dissociation_limit(-3.0).is_err());
        let hd = SystemSpec::codata2002(Species::HDPlus);
        assert_eq!(
            hd.dissociation_threshold(),
            dissociation_limit(MD_OVER_ME).unwrap()
        );
    }

    #[test]
    fn wavenumbers() {
        assert_eq!(to_wavenumbers(1.0), 219474.6313705);
        assert_eq!(to_wavenumbers(0.0), 0.0);
        assert!((to_wavenumbers(-0.5) + 109737.31568525).abs() < 1e-9);
    }

    #[test]
    fn mass_validation() {
        assert!(MassRatios::new(0.5, 3.0, "x").is_err());
        assert!(MassRatios::new(2.0, 3.0, "x").is_ok());
    }
}
