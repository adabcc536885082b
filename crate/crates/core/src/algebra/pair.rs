//! Weak-form derivation in electron-nucleus coordinates.
//!
//! With `s1`, `s2` the vectors from each nucleus to the electron, the factorized
//! ansatz is `Psi = sum_k T_k(s1, s2) f_k(r1, r2, R)` where the `T_k` are M=0
//! solid harmonics. Because each `T_k` is harmonic, the quadratic form
//! `<Psi|H|Psi'>` averaged over orientations is free of centrifugal terms. Scalars
//! here are Laurent polynomials in `(r1, r2, R, z1, z2)` with `z1`, `z2` the lab Z
//! components of `s1`, `s2`; vectors live in the span of `(s1, s2, e_Z)`.

use std::collections::BTreeMap;

use super::hamiltonian::{EffectiveHamiltonian, OperatorTerm, Unknown};
use super::poly::{accumulate, rat, Laurent, Rational};
use super::{Channel, ExchangeSector};
use crate::error::{Error, Result};

type P5 = Laurent<5>;
pub type P3 = Laurent<3>;
type Vec3 = [P5; 3];

const R1: usize = 0;
const R2: usize = 1;
const RR: usize = 2;
const Z1: usize = 3;
const Z2: usize = 4;

/// Derivative label on a radial function: none, or d/dr1, d/dr2, d/dR.
pub type PairDeriv = Option<usize>;

/// Bilinear form `sum <d^u f_k | p | d^v g_m>` in `(r1, r2, R)`, already
/// multiplied by the volume weight `r1 r2 R`.
#[derive(Clone, Debug, Default)]
pub struct PairForm {
    pub j: u32,
    pub terms: BTreeMap<(usize, usize, Channel, PairDeriv, PairDeriv), P3>,
}

fn m5(e: [i32; 5], c: Rational) -> P5 {
    P5::monomial(e, c)
}

fn d12() -> P5 {
    // s1.s2 = (r1^2 + r2^2 - R^2) / 2
    let h = rat(1, 2);
    let mut p = P5::zero();
    p.add_term([2, 0, 0, 0, 0], h.clone());
    p.add_term([0, 2, 0, 0, 0], h.clone());
    p.add_term([0, 0, 2, 0, 0], -h);
    p
}

/// Solid-harmonic prefactors for the factorized unknowns.
pub fn prefactors(j: u32) -> Result<Vec<P5>> {
    let one = rat(1, 1);
    let z1 = m5([0, 0, 0, 1, 0], one.clone());
    let z2 = m5([0, 0, 0, 0, 1], one.clone());
    Ok(match j {
        0 => vec![P5::one()],
        1 => vec![z1, z2],
        2 => {
            let y2 = |zz: P5, dotp: P5| (&zz.scale(&rat(3, 1)) - &dotp).scale(&rat(1, 2));
            vec![
                y2(z1.mul(&z1), m5([2, 0, 0, 0, 0], one.clone())),
                y2(z2.mul(&z2), m5([0, 2, 0, 0, 0], one.clone())),
                y2(z1.mul(&z2), d12()),
            ]
        }
        _ => return Err(Error::UnsupportedSymmetry { j }),
    })
}

fn dot(u: &Vec3, v: &Vec3) -> P5 {
    let one = rat(1, 1);
    let g = |a: usize, b: usize| -> P5 {
        match (a.min(b), a.max(b)) {
            (0, 0) => m5([2, 0, 0, 0, 0], one.clone()),
            (1, 1) => m5([0, 2, 0, 0, 0], one.clone()),
            (0, 1) => d12(),
            (0, 2) => m5([0, 0, 0, 1, 0], one.clone()),
            (1, 2) => m5([0, 0, 0, 0, 1], one.clone()),
            _ => P5::one(),
        }
    };
    let mut out = P5::zero();
    for a in 0..3 {
        if u[a].is_zero() {
            continue;
        }
        for b in 0..3 {
            if !v[b].is_zero() {
                out.add_assign_ref(&u[a].mul(&v[b]).mul(&g(a, b)));
            }
        }
    }
    out
}

/// Gradients of `(r1, r2, R)` with respect to `s_which` (1 or 2).
fn coordinate_gradients(which: usize) -> [Vec3; 3] {
    let one = rat(1, 1);
    let inv = |i: usize| {
        let mut e = [0; 5];
        e[i] = -1;
        m5(e, one.clone())
    };
    let z = P5::zero;
    if which == 1 {
        [
            [inv(R1), z(), z()],
            [z(), z(), z()],
            [inv(RR), -&inv(RR), z()],
        ]
    } else {
        [
            [z(), z(), z()],
            [z(), inv(R2), z()],
            [-&inv(RR), inv(RR), z()],
        ]
    }
}

fn grad_scalar(p: &P5, which: usize, cg: &[Vec3; 3]) -> Vec3 {
    let mut out = [P5::zero(), P5::zero(), P5::zero()];
    for var in [R1, R2, RR] {
        let d = p.derivative(var);
        if d.is_zero() {
            continue;
        }
        for k in 0..3 {
            if !cg[var][k].is_zero() {
                out[k].add_assign_ref(&cg[var][k].mul(&d));
            }
        }
    }
    let zvar = if which == 1 { Z1 } else { Z2 };
    out[2].add_assign_ref(&p.derivative(zvar));
    out
}

/// `grad_which Psi` as a map from (unknown, derivative label) to vector coefficient.
fn grad_psi(t: &[P5], which: usize) -> BTreeMap<(usize, PairDeriv), Vec3> {
    let cg = coordinate_gradients(which);
    let mut out = BTreeMap::new();
    for (k, tk) in t.iter().enumerate() {
        out.insert((k, None), grad_scalar(tk, which, &cg));
        for var in [R1, R2, RR] {
            let v: Vec3 = [cg[var][0].mul(tk), cg[var][1].mul(tk), cg[var][2].mul(tk)];
            if v.iter().any(|c| !c.is_zero()) {
                out.insert((k, Some(var)), v);
            }
        }
    }
    out
}

/// Sum over perfect pairings of `a` copies of `s1` and `b` copies of `s2`,
/// weighted by the products of their dot products.
fn pairing_sum(a: u32, b: u32, memo: &mut BTreeMap<(u32, u32), P3>) -> P3 {
    if let Some(p) = memo.get(&(a, b)) {
        return p.clone();
    }
    let one = rat(1, 1);
    let out = if (a + b) % 2 == 1 {
        P3::zero()
    } else if a == 0 && b == 0 {
        P3::one()
    } else if a > 0 {
        let mut p = P3::zero();
        if a >= 2 {
            let r = pairing_sum(a - 2, b, memo);
            p.add_scaled(
                &r.mul(&P3::monomial([2, 0, 0], one.clone())),
                &rat(a as i64 - 1, 1),
            );
        }
        if b >= 1 {
            let r = pairing_sum(a - 1, b - 1, memo);
            let mut dd = P3::zero();
            dd.add_term([2, 0, 0], rat(1, 2));
            dd.add_term([0, 2, 0], rat(1, 2));
            dd.add_term([0, 0, 2], rat(-1, 2));
            p.add_scaled(&r.mul(&dd), &rat(b as i64, 1));
        }
        p
    } else {
        let r = pairing_sum(0, b - 2, memo);
        r.mul(&P3::monomial([0, 2, 0], one))
            .scale(&rat(b as i64 - 1, 1))
    };
    memo.insert((a, b), out.clone());
    out
}

fn double_factorial(n: u32) -> i64 {
    (1..=n as i64).rev().step_by(2).product::<i64>().max(1)
}

/// Average over orientations: replaces `z1^a z2^b` by its rotational mean.
fn orientation_average(p: &P5, memo: &mut BTreeMap<(u32, u32), P3>) -> P3 {
    let mut out = P3::zero();
    for (e, c) in p.terms() {
        let (a, b) = (e[3] as u32, e[4] as u32);
        if (a + b) % 2 == 1 {
            continue;
        }
        let avg = pairing_sum(a, b, memo).scale(&rat(1, double_factorial(a + b + 1)));
        out.add_assign_ref(&avg.mul_monomial(&[e[0], e[1], e[2]], c));
    }
    out
}

/// Derive the orientation-averaged quadratic forms of every mass channel, the
/// Coulomb term and the overlap, each multiplied by `r1 r2 R`.
pub fn weak_form(j: u32) -> Result<PairForm> {
    let t = prefactors(j)?;
    let g1 = grad_psi(&t, 1);
    let g2 = grad_psi(&t, 2);
    let mut memo = BTreeMap::new();
    let mut raw: BTreeMap<(usize, usize, Channel, PairDeriv, PairDeriv), P5> = BTreeMap::new();
    let mut push = |key, p: P5| {
        if !p.is_zero() {
            raw.entry(key).or_insert_with(P5::zero).add_assign_ref(&p);
        }
    };
    // (grad1 + grad2) Psi
    let mut ge: BTreeMap<(usize, PairDeriv), Vec3> = g1.clone();
    for (k, v) in &g2 {
        let slot = ge
            .entry(*k)
            .or_insert_with(|| [P5::zero(), P5::zero(), P5::zero()]);
        for c in 0..3 {
            slot[c].add_assign_ref(&v[c]);
        }
    }
    for ((k, u), a) in &ge {
        for ((m, v), b) in &ge {
            push(
                (*k, *m, Channel::Electron, *u, *v),
                dot(a, b).scale(&rat(1, 2)),
            );
        }
    }
    for ((k, u), a) in &g1 {
        for ((m, v), b) in &g1 {
            let d = dot(a, b);
            push((*k, *m, Channel::Nuclear, *u, *v), d.scale(&rat(1, 4)));
            push(
                (*k, *m, Channel::SymmetryBreaking, *u, *v),
                d.scale(&rat(1, 4)),
            );
        }
    }
    for ((k, u), a) in &g2 {
        for ((m, v), b) in &g2 {
            let d = dot(a, b);
            push((*k, *m, Channel::Nuclear, *u, *v), d.scale(&rat(1, 4)));
            push(
                (*k, *m, Channel::SymmetryBreaking, *u, *v),
                d.scale(&rat(-1, 4)),
            );
        }
    }
    let one = rat(1, 1);
    let mut coulomb = P5::zero();
    coulomb.add_term([-1, 0, 0, 0, 0], -one.clone());
    coulomb.add_term([0, -1, 0, 0, 0], -one.clone());
    coulomb.add_term([0, 0, -1, 0, 0], one.clone());
    for (k, tk) in t.iter().enumerate() {
        for (m, tm) in t.iter().enumerate() {
            let tt = tk.mul(tm);
            push((k, m, Channel::Coulomb, None, None), tt.mul(&coulomb));
            push((k, m, Channel::Overlap, None, None), tt);
        }
    }
    let mut terms = BTreeMap::new();
    for (key, p) in raw {
        let avg = orientation_average(&p, &mut memo).mul_monomial(&[1, 1, 1], &one);
        if avg.is_zero() {
            continue;
        }
        if !avg.is_polynomial() {
            return Err(Error::Derivation(format!(
                "weighted coefficient of {key:?} is not polynomial: {avg}"
            )));
        }
        terms.insert(key, avg);
    }
    Ok(PairForm { j, terms })
}

/// Perimetric images of `d/dr1`, `d/dr2`, `d/dR` in terms of `(d/dx, d/dy, d/dz)`.
const CHAIN: [[i64; 3]; 3] = [[1, 1, -1], [1, -1, 1], [-1, 1, 1]];

/// Change to perimetric coordinates `x = r1+r2-R`, `y = r1-r2+R`, `z = -r1+r2+R`,
/// expand every coefficient into monomials and check that each derivative is
/// matched by a power of its coordinate, so that every term maps to banded
/// one-dimensional factors.
pub fn regularize_and_transform(form: &PairForm) -> Result<EffectiveHamiltonian> {
    let half = rat(1, 2);
    let v = |i: usize| P3::var(i);
    let images = [
        (&v(0) + &v(1)).scale(&half),
        (&v(0) + &v(2)).scale(&half),
        (&v(1) + &v(2)).scale(&half),
    ];
    let expand = |d: PairDeriv| -> Vec<(Option<u8>, i64)> {
        match d {
            None => vec![(None, 1)],
            Some(var) => (0..3).map(|a| (Some(a as u8), CHAIN[var][a])).collect(),
        }
    };
    let mut acc: BTreeMap<(usize, usize, Channel, Option<u8>, Option<u8>, [u32; 3]), Rational> =
        BTreeMap::new();
    for ((k, m, ch, u, w), p) in &form.terms {
        let q = p
            .substitute(&images)
            .ok_or_else(|| Error::Derivation("negative exponent in weighted form".into()))?;
        for (du, su) in expand(*u) {
            for (dv, sv) in expand(*w) {
                let s = rat(su * sv, 1);
                for (e, c) in q.terms() {
                    let exps = [e[0] as u32, e[1] as u32, e[2] as u32];
                    accumulate(&mut acc, (*k, *m, *ch, du, dv, exps), c * &s);
                }
            }
        }
    }
    let mut terms = Vec::with_capacity(acc.len());
    for ((row, col, channel, left, right, exps), coeff) in acc {
        let term = OperatorTerm {
            row,
            col,
            channel,
            swap: false,
            exps,
            left,
            right,
            coeff,
        };
        term.check_banded()?;
        terms.push(term);
    }
    let n = form.j as usize + 1;
    Ok(EffectiveHamiltonian {
        j: form.j,
        sector: ExchangeSector::None,
        unknowns: (0..n).map(Unknown::full).collect(),
        terms,
    })
}

/// Full derivation for a heteronuclear ion: weak form then perimetric transform.
pub fn derive_full(j: u32) -> Result<EffectiveHamiltonian> {
    regularize_and_transform(&weak_form(j)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_average_of_second_moments() {
        let mut memo = BTreeMap::new();
        // <z1^2> = r1^2/3
        let p = P5::monomial([0, 0, 0, 2, 0], rat(1, 1));
        assert_eq!(
            orientation_average(&p, &mut memo),
            P3::monomial([2, 0, 0], rat(1, 3))
        );
        // <z1^4> = r1^4/5
        let p = P5::monomial([0, 0, 0, 4, 0], rat(1, 1));
        assert_eq!(
            orientation_average(&p, &mut memo),
            P3::monomial([4, 0, 0], rat(1, 5))
        );
        let p = P5::monomial([0, 0, 0, 1, 0], rat(1, 1));
        assert!(orientation_average(&p, &mut memo).is_zero());
    }

    #[test]
    fn s_state_overlap_and_coulomb() {
        let f = weak_form(0).unwrap();
        let b = &f.terms[&(0, 0, Channel::Overlap, None, None)];
        assert_eq!(*b, P3::monomial([1, 1, 1], rat(1, 1)));
        let c = &f.terms[&(0, 0, Channel::Coulomb, None, None)];
        let mut expected = P3::zero();
        expected.add_term([0, 1, 1], rat(-1, 1));
        expected.add_term([1, 0, 1], rat(-1, 1));
        expected.add_term([1, 1, 0], rat(1, 1));
        assert_eq!(*c, expected);
    }

    #[test]
    fn s_state_electron_kinetic_diagonal_terms() {
        // 1/2 |grad_r f|^2 r1 r2 R contains 1/2 r1 r2 R (f_r1^2 + f_r2^2 + 2 cos f_r1 f_r2)
        let f = weak_form(0).unwrap();
        let t = &f.terms[&(0, 0, Channel::Electron, Some(R1), Some(R1))];
        assert_eq!(*t, P3::monomial([1, 1, 1], rat(1, 2)));
    }

    #[test]
    fn forms_are_symmetric() {
        for j in 0..=2 {
            let f = weak_form(j).unwrap();
            for ((k, m, ch, u, v), p) in &f.terms {
                assert_eq!(f.terms.get(&(*m, *k, *ch, *v, *u)), Some(p), "J={j}");
            }
        }
    }

    #[test]
    fn perimetric_coulomb_term() {
        let h = derive_full(0).unwrap();
        // r1 r2 - r2 R - r1 R in perimetric coordinates
        let mut got = P3::zero();
        for t in h.terms.iter().filter(|t| t.channel == Channel::Coulomb) {
            let e = t.exps;
            got.add_term([e[0] as i32, e[1] as i32, e[2] as i32], t.coeff.clone());
        }
        let half = rat(1, 2);
        let r1 = (&P3::var(0) + &P3::var(1)).scale(&half);
        let r2 = (&P3::var(0) + &P3::var(2)).scale(&half);
        let rr = (&P3::var(1) + &P3::var(2)).scale(&half);
        let expected = &(&r1.mul(&r2) - &r2.mul(&rr)) - &r1.mul(&rr);
        assert_eq!(got, expected);
    }
}
