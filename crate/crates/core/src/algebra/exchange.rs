//! Elimination of dependent radial functions for homonuclear ions.
//!
//! Exchanging the nuclei maps `s1 <-> s2`, i.e. `y <-> z` in perimetric
//! coordinates. With exchange eigenvalue `eta`, the relations are
//! `F = eta F~` (J=0), `G = eta F~` (J=1) and `G = eta F~`, `H = eta H~` (J=2),
//! where `~` denotes the swap.

use std::collections::BTreeMap;

use super::hamiltonian::{swap_axis, EffectiveHamiltonian, OperatorTerm, Unknown, YzSymmetry};
use super::poly::{accumulate, rat, Rational};
use super::{Channel, ExchangeSector};
use crate::error::{Error, Result};

/// For each original unknown: (reduced unknown, evaluated with swap, sign).
fn substitution(j: u32, eta: i64) -> Vec<(usize, bool, i64)> {
    match j {
        0 => vec![(0, false, 1)],
        1 => vec![(0, false, 1), (0, true, eta)],
        _ => vec![(0, false, 1), (0, true, eta), (1, false, 1)],
    }
}

fn reduced_unknowns(j: u32, eta: i64) -> Vec<Unknown> {
    let restricted = if eta > 0 {
        YzSymmetry::Symmetric
    } else {
        YzSymmetry::Antisymmetric
    };
    let named = |name: &str, yz| Unknown {
        name: name.to_string(),
        yz,
    };
    match j {
        0 => vec![named("F", restricted)],
        1 => vec![named("F", YzSymmetry::None)],
        _ => vec![named("F", YzSymmetry::None), named("H", restricted)],
    }
}

/// Eliminate the unknowns fixed by exchange symmetry. The mass-polarization
/// channel is dropped since its coefficient vanishes for equal masses.
pub fn project_exchange(
    full: &EffectiveHamiltonian,
    sector: ExchangeSector,
) -> Result<EffectiveHamiltonian> {
    let eta = sector.parity().ok_or_else(|| {
        Error::InvalidSector("exchange projection needs a singlet or triplet sector".into())
    })?;
    if full.sector != ExchangeSector::None || full.unknowns.len() != full.j as usize + 1 {
        return Err(Error::InvalidSector("operator is already projected".into()));
    }
    let sub = substitution(full.j, eta);
    let mut acc: BTreeMap<_, Rational> = BTreeMap::new();
    for t in &full.terms {
        if t.channel == Channel::SymmetryBreaking {
            continue;
        }
        let (row, sk, ek) = sub[t.row];
        let (col, sm, em) = sub[t.col];
        // change variables by S^sk over the whole integrand
        let (exps, left, right) = if sk {
            (
                [t.exps[0], t.exps[2], t.exps[1]],
                swap_axis(t.left),
                swap_axis(t.right),
            )
        } else {
            (t.exps, t.left, t.right)
        };
        let key = (row, col, t.channel, sk ^ sm, exps, left, right);
        accumulate(&mut acc, key, &t.coeff * &rat(ek * em, 1));
    }
    let terms = acc
        .into_iter()
        .map(
            |((row, col, channel, swap, exps, left, right), coeff)| OperatorTerm {
                row,
                col,
                channel,
                swap,
                exps,
                left,
                right,
                coeff,
            },
        )
        .collect();
    Ok(EffectiveHamiltonian {
        j: full.j,
        sector,
        unknowns: reduced_unknowns(full.j, eta),
        terms,
    })
}
