//! Normalized mass-ratio sensitivities `10^2 p dE/dp` of bound levels.
//!
//! With `lambda = m_e/M_P` and `mu = M_P/M_D` for HD+, the late-bound
//! coefficients are `1/mu12 = lambda (1 + mu)` and `1/mu0 = lambda (1 - mu)`.
//! For the homonuclear ions `1/mu12 = 2 lambda` with `lambda` the inverse
//! nuclear mass.

use std::fmt;
use std::str::FromStr;

use crate::assembly::BandedPair;
use crate::eigensolver::{shift_refine, LevelResult, Problem, SolveRequest};
use crate::error::{Error, Result};
use crate::systems::{reduced_masses, MassRatios, Species, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameter {
    /// `m_e / M_P`.
    LambdaEOverP,
    /// `m_e / M_D`.
    LambdaEOverD,
    /// `M_P / M_D`.
    MuPOverD,
}

impl Parameter {
    pub fn tag(self) -> &'static str {
        match self {
            Parameter::LambdaEOverP => "lambda_e_over_p",
            Parameter::LambdaEOverD => "lambda_e_over_d",
            Parameter::MuPOverD => "mu_p_over_d",
        }
    }

    /// The mass-ratio parameters tabulated for a species.
    pub fn for_species(species: Species) -> Vec<Parameter> {
        match species {
            Species::H2Plus => vec![Parameter::LambdaEOverP],
            Species::D2Plus => vec![Parameter::LambdaEOverD],
            Species::HDPlus => vec![Parameter::LambdaEOverP, Parameter::MuPOverD],
        }
    }

    pub fn check(self, species: Species) -> Result<()> {
        if Parameter::for_species(species).contains(&self) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "parameter {} does not apply to {species}",
                self.tag()
            )))
        }
    }

    /// Value of the parameter for the given mass ratios.
    pub fn value(self, masses: &MassRatios) -> f64 {
        match self {
            Parameter::LambdaEOverP => 1.0 / masses.mp_over_me,
            Parameter::LambdaEOverD => 1.0 / masses.md_over_me,
            Parameter::MuPOverD => masses.mp_over_me / masses.md_over_me,
        }
    }

    /// Mass ratios with this parameter scaled by `factor` and the species' other
    /// parameter held fixed.
    pub fn scaled(self, masses: &MassRatios, factor: f64) -> Result<MassRatios> {
        let (mp, md) = (masses.mp_over_me, masses.md_over_me);
        let (mp, md) = match self {
            // mu is held fixed, so both nuclear masses move together
            Parameter::LambdaEOverP => (mp / factor, md / factor),
            Parameter::LambdaEOverD => (mp, md / factor),
            Parameter::MuPOverD => (mp, md / factor),
        };
        MassRatios::new(mp, md, &masses.source_label)
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Parameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda_e_over_p" => Ok(Parameter::LambdaEOverP),
            "lambda_e_over_d" => Ok(Parameter::LambdaEOverD),
            "mu_p_over_d" => Ok(Parameter::MuPOverD),
            other => Err(Error::Parse(format!(
                "unknown sensitivity parameter '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    HellmannFeynman,
    CentralFd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityRequest {
    pub parameter: Parameter,
    pub method: Method,
    /// Relative step of the finite-difference method.
    pub h: f64,
}

impl SensitivityRequest {
    pub fn new(parameter: Parameter, method: Method) -> Self {
        Self {
            parameter,
            method,
            h: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub v: usize,
    pub parameter: Parameter,
    pub method: Method,
    /// `10^2 p dE/dp` in hartree.
    pub value: f64,
    /// Error estimate: the Richardson correction for FD, the residual bound for HF.
    pub gap: f64,
}

/// `p dE/dp` from the expectation values of the mass channels in a
/// `B`-normalized eigenvector.
pub fn hellmann_feynman(
    pair: &BandedPair,
    species: Species,
    masses: &MassRatios,
    x: &[f64],
    parameter: Parameter,
) -> Result<f64> {
    parameter.check(species)?;
    let norm = pair.b.bilinear(x, x);
    let a_n = pair.a_nuclear.bilinear(x, x) / norm;
    let a_sb = pair.a_symbreak.bilinear(x, x) / norm;
    let rm = reduced_masses(&SystemSpec::new(species, masses));
    Ok(match parameter {
        Parameter::LambdaEOverP | Parameter::LambdaEOverD => {
            rm.inv_mu12() * a_n + rm.inv_mu0 * a_sb
        }
        Parameter::MuPOverD => (a_n - a_sb) / masses.md_over_me,
    })
}

/// Energy of `level` re-solved at perturbed masses.
fn energy_at(
    pair: &BandedPair,
    species: Species,
    masses: &MassRatios,
    level: &LevelResult,
    req: &SolveRequest,
) -> Result<f64> {
    let p = Problem::from_pair(pair, &reduced_masses(&SystemSpec::new(species, masses)));
    // the shift sits below the unperturbed level by more than the perturbation
    let (refined, _) = shift_refine(&p, level, 1e-5, req)?;
    Ok(refined.energy)
}

/// Central-difference `p dE/dp` with one Richardson halving. Returns the
/// extrapolated value and the size of the Richardson correction.
pub fn finite_difference(
    pair: &BandedPair,
    species: Species,
    masses: &MassRatios,
    level: &LevelResult,
    parameter: Parameter,
    h: f64,
) -> Result<(f64, f64)> {
    parameter.check(species)?;
    if !(h > 0.0 && h < 1e-2) {
        return Err(Error::Domain(format!(
            "finite-difference step {h} out of range"
        )));
    }
    let req = SolveRequest::window(1);
    let central = |h: f64| -> Result<f64> {
        let up = energy_at(
            pair,
            species,
            &parameter.scaled(masses, 1.0 + h)?,
            level,
            &req,
        )?;
        let down = energy_at(
            pair,
            species,
            &parameter.scaled(masses, 1.0 - h)?,
            level,
            &req,
        )?;
        Ok((up - down) / (2.0 * h))
    };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    Ok(((4.0 * fine - coarse) / 3.0, (fine - coarse).abs()))
}

/// Normalized sensitivity of one level. Levels that miss the residual
/// tolerance are refused.
pub fn sensitivity(
    pair: &BandedPair,
    species: Species,
    masses: &MassRatios,
    level: &LevelResult,
    x: &[f64],
    req: &SensitivityRequest,
) -> Result<SensitivityResult> {
    if !level.converged {
        return Err(Error::InsufficientConvergence(format!(
            "level v={} has residual {:.1e}; sensitivities need a converged level",
            level.v, level.residual
        )));
    }
    let (value, gap) = match req.method {
        Method::HellmannFeynman => {
            let d = hellmann_feynman(pair, species, masses, x, req.parameter)?;
            (d, level.residual)
        }
        Method::CentralFd => finite_difference(pair, species, masses, level, req.parameter, req.h)?,
    };
    Ok(SensitivityResult {
        v: level.v,
        parameter: req.parameter,
        method: req.method,
        value: 100.0 * value,
        gap: 100.0 * gap,
    })
}

/// `10^2 lambda dE/dlambda` of the atomic threshold `-1/2 (1 + lambda)^-1`.
pub fn threshold_sensitivity(lambda: f64) -> f64 {
    100.0 * lambda / (2.0 * (1.0 + lambda).powi(2))
}

/// Relative changes beyond this leave the linear regime.
pub const LINEAR_REGIME: f64 = 1e-8;

/// First-order energy at new mass ratios. The flag is false when some relative
/// parameter change exceeds [`LINEAR_REGIME`].
pub fn predict_energy_at(
    energy: f64,
    base: &MassRatios,
    new: &MassRatios,
    sensitivities: &[SensitivityResult],
) -> (f64, bool) {
    let mut e = energy;
    let mut linear = true;
    for s in sensitivities {
        let p0 = s.parameter.value(base);
        let rel = (s.parameter.value(new) - p0) / p0;
        linear &= rel.abs() <= LINEAR_REGIME;
        e += s.value / 100.0 * rel;
    }
    (e, linear)
}
