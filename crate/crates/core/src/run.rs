//! Configured runs: derive, assemble, solve and report.

use std::collections::BTreeMap;

use crate::algebra::{derive, EffectiveHamiltonian, ExchangeSector, YzSymmetry};
use crate::assembly::{assemble, BandedPair};
use crate::config::RunConfig;
use crate::eigensolver::{
    relabel_by_inertia, shift_refine, solve, stable_digits, verify_labels, Problem, SolveRequest,
};
use crate::error::Result;
use crate::refdata::{sha256_hex, write_results, ResultRow};
use crate::sensitivity::{sensitivity, Method, Parameter, SensitivityRequest};
use crate::sturmian::{BasisTruncation, ScaleParams};
use crate::systems::{reduced_masses, MassRatios, SystemSpec, MD_OVER_ME, MP_OVER_ME};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub provenance: Vec<String>,
    pub rows: Vec<ResultRow>,
    /// `B`-normalized eigenvector of each row, in the basis of [`assemble_config`].
    pub vectors: Vec<Vec<f64>>,
    pub dimension: usize,
    pub width: usize,
    /// Size of one unrestricted radial block.
    pub n_tot: usize,
}

impl RunOutput {
    pub fn to_csv(&self) -> String {
        write_results(&self.provenance, &self.rows)
    }
}

pub fn hamiltonian(config: &RunConfig, sector: ExchangeSector) -> Result<EffectiveHamiltonian> {
    let homo = config.species.is_homonuclear();
    match &config.cache_dir {
        Some(dir) => EffectiveHamiltonian::load_or_derive(dir, config.j, homo, sector),
        None => derive(config.j, homo, sector),
    }
}

fn window_energies(
    ham: &EffectiveHamiltonian,
    config: &RunConfig,
    n: u32,
    masses: &MassRatios,
) -> Result<Vec<f64>> {
    let scales = ScaleParams::new(config.alpha, config.beta)?;
    let pair = assemble(ham, n, config.n_x.min(n), scales, config.species.label())?;
    let p = Problem::from_pair(
        &pair,
        &reduced_masses(&SystemSpec::new(config.species, masses)),
    );
    let req = SolveRequest {
        seed: config.seed,
        tolerance: config.tolerance,
        polish_steps: 0,
        ..SolveRequest::window(config.levels.min(p.dim()))
    };
    Ok(solve(&p, &req)?.levels.iter().map(|l| l.energy).collect())
}

/// Energy offset above a level at which the inertia count includes it.
const LABEL_MARGIN: f64 = 1e-9;

/// Execute a run. Only levels below the dissociation threshold whose residual
/// meets the tolerance are reported; the others are listed in the provenance.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let masses = if (config.mp_over_me, config.md_over_me) == (MP_OVER_ME, MD_OVER_ME) {
        MassRatios::default()
    } else {
        MassRatios::new(config.mp_over_me, config.md_over_me, "override")?
    };
    let system = SystemSpec::new(config.species, &masses);
    let threshold = system.dissociation_threshold();
    let (ham, pair) = assemble_config(config)?;
    let sector = ham.sector;
    let p = Problem::from_pair(&pair, &reduced_masses(&system));
    let count = config.levels.min(p.dim());
    let req = match config.shift {
        Some(target) => SolveRequest::shifted(target, count),
        None => SolveRequest::window(count),
    };
    let req = SolveRequest {
        seed: config.seed,
        tolerance: config.tolerance,
        // refinement replaces polishing
        polish_steps: if config.refine { 0 } else { req.polish_steps },
        polish_ceiling: threshold,
        ..req
    };
    let mut sol = solve(&p, &req)?;
    let relabeled = config.shift.is_none() && !verify_labels(&p, &sol, LABEL_MARGIN, threshold)?;
    if relabeled {
        relabel_by_inertia(&p, &mut sol, LABEL_MARGIN, threshold)?;
    }
    if config.refine {
        for (level, x) in sol.levels.iter_mut().zip(sol.vectors.iter_mut()) {
            if level.energy >= threshold {
                continue;
            }
            let (refined, y) = shift_refine(&p, level, 1e-6, &req)?;
            *level = refined;
            *x = y;
        }
    }
    let digits: BTreeMap<usize, u32> = if config.digits_check && config.n >= 2 {
        let coarse = window_energies(&ham, config, config.n - 2, &masses)?;
        sol.levels
            .iter()
            .filter_map(|l| coarse.get(l.v).map(|c| (l.v, stable_digits(l.energy, *c))))
            .collect()
    } else {
        BTreeMap::new()
    };
    let mut provenance = vec![
        format!("molion {}", env!("CARGO_PKG_VERSION")),
        format!("config_sha256 {}", sha256_hex(config.to_text().as_bytes())),
        format!(
            "masses mp_over_me={} md_over_me={} source={}",
            masses.mp_over_me, masses.md_over_me, masses.source_label
        ),
        format!("seed {}", config.seed),
        format!(
            "basis N={} N_x={} alpha={} beta={} sector={}",
            config.n, config.n_x, config.alpha, config.beta, sector
        ),
    ];
    let n_tot = BasisTruncation::new(config.n, config.n_x, YzSymmetry::None)?.size();
    provenance.push(format!(
        "dimension {} n_tot {} blocks {} width {}",
        pair.dim(),
        n_tot,
        ham.unknowns.len(),
        pair.width()
    ));
    provenance.push(format!("threshold {threshold:.14}"));
    if relabeled {
        provenance.push("labels from inertia counts".into());
    }
    let mut rows = Vec::new();
    let mut vectors = Vec::new();
    for (level, x) in sol.levels.iter().zip(&sol.vectors) {
        if level.energy >= threshold {
            continue;
        }
        if !level.converged {
            provenance.push(format!(
                "dropped v={} energy={:.14} residual={:.3e}",
                level.v, level.energy, level.residual
            ));
            continue;
        }
        let mut row = ResultRow {
            species: config.species,
            j: config.j,
            sector,
            v: level.v,
            energy: level.energy,
            residual: level.residual,
            converged_digits: digits.get(&level.v).copied(),
            sens_lambda: None,
            sens_mu: None,
        };
        if config.sensitivities {
            for parameter in Parameter::for_species(config.species) {
                let hf = sensitivity(
                    &pair,
                    config.species,
                    &masses,
                    level,
                    x,
                    &SensitivityRequest::new(parameter, Method::HellmannFeynman),
                )?;
                if config.fd_check {
                    let fd = sensitivity(
                        &pair,
                        config.species,
                        &masses,
                        level,
                        x,
                        &SensitivityRequest::new(parameter, Method::CentralFd),
                    )?;
                    provenance.push(format!(
                        "fd_check v={} {} hf={:.8} fd={:.8} rel={:.1e}",
                        level.v,
                        parameter,
                        hf.value,
                        fd.value,
                        ((hf.value - fd.value) / hf.value).abs()
                    ));
                }
                if parameter == Parameter::MuPOverD {
                    row.sens_mu = Some(hf.value);
                } else {
                    row.sens_lambda = Some(hf.value);
                }
            }
        }
        rows.push(row);
        vectors.push(x.clone());
    }
    Ok(RunOutput {
        provenance,
        rows,
        vectors,
        dimension: pair.dim(),
        width: pair.width(),
        n_tot,
    })
}

/// Assemble the pair described by a configuration.
pub fn assemble_config(config: &RunConfig) -> Result<(EffectiveHamiltonian, BandedPair)> {
    let sector = config
        .sector
        .unwrap_or_else(|| ExchangeSector::natural(config.species, config.j));
    let ham = hamiltonian(config, sector)?;
    let pair = assemble(
        &ham,
        config.n,
        config.n_x,
        config.scales(),
        config.species.label(),
    )?;
    Ok((ham, pair))
}
