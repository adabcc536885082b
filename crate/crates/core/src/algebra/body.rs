//! Body-frame derivation of the coupled radial operator.
//!
//! The kinetic operator is written in centered Jacobi coordinates (internuclear
//! vector `R` and electron vector `r` measured from the midpoint of the nuclei),
//! applied to the M=0 angular ansatz and projected back onto the angular
//! functions. Scalars are Laurent polynomials in `(R, rho, zeta, R_Z, r_Z)`,
//! where `zeta` is the projection of `r` on the internuclear axis, `rho` the
//! distance from that axis, and `R_Z`, `r_Z` are lab-frame Z components.
//!
//! The angular functions are the expanded forms
//! `c = cos(theta) = R_Z / R` and `s = (r_Z - zeta c) / rho` (the Z component of
//! the in-plane unit vector orthogonal to the axis). For D states the second and
//! third radial functions are rescaled by `sqrt(3)` so that every coefficient
//! stays rational.

use std::collections::BTreeMap;

use super::poly::{rat, Laurent, Rational};
use super::Channel;
use crate::error::{Error, Result};

type P5 = Laurent<5>;
/// Laurent polynomial in `(R, rho, zeta)`.
pub type P3 = Laurent<3>;

const R: usize = 0;
const RHO: usize = 1;
const ZETA: usize = 2;
const RZ: usize = 3;
const LZ: usize = 4;

/// Derivative multi-index over `(R, rho, zeta)`.
pub type Deriv = [u8; 3];

/// A scalar differential operator `sum coeff * d^deriv`.
pub type DiffOp = BTreeMap<Deriv, P3>;

/// Vector in the span of `(R_vec, r_vec, e_Z)`.
type Vec3 = [P5; 3];

/// Which Jacobi vector a gradient acts on.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Wrt {
    Nuclear,
    Electron,
}

/// `(J+1) x (J+1)` matrix of radial differential operators for each mass channel.
/// The Coulomb channel is the identity: it means multiplication by the potential.
#[derive(Clone, Debug)]
pub struct RadialOperator {
    pub j: u32,
    pub channels: Vec<(Channel, Vec<Vec<DiffOp>>)>,
}

impl RadialOperator {
    pub fn dim(&self) -> usize {
        self.j as usize + 1
    }

    pub fn channel(&self, ch: Channel) -> Option<&Vec<Vec<DiffOp>>> {
        self.channels.iter().find(|(c, _)| *c == ch).map(|(_, m)| m)
    }

    /// Zeroth-order coefficients of the kinetic channels, which carry the
    /// centrifugal terms. Returns `(channel, row, col, coefficient)` for every
    /// nonzero entry.
    pub fn centrifugal_terms(&self) -> Vec<(Channel, usize, usize, P3)> {
        let mut out = Vec::new();
        for (ch, m) in &self.channels {
            if *ch == Channel::Coulomb {
                continue;
            }
            for (r, row) in m.iter().enumerate() {
                for (c, op) in row.iter().enumerate() {
                    if let Some(p) = op.get(&[0, 0, 0]) {
                        if !p.is_zero() {
                            out.push((*ch, r, c, p.clone()));
                        }
                    }
                }
            }
        }
        out
    }

    /// True if some centrifugal coefficient has a pole in `R` or `rho`.
    pub fn has_centrifugal_pole(&self) -> bool {
        self.centrifugal_terms().iter().any(|(_, _, _, p)| {
            let m = p.min_exponents();
            m[0] < 0 || m[1] < 0
        })
    }
}

fn p5_const(c: Rational) -> P5 {
    P5::constant(c)
}

fn mono5(e: [i32; 5], c: Rational) -> P5 {
    P5::monomial(e, c)
}

fn vzero() -> Vec3 {
    [P5::zero(), P5::zero(), P5::zero()]
}

fn vadd_scaled(acc: &mut Vec3, v: &Vec3, s: &P5) {
    for k in 0..3 {
        if !v[k].is_zero() {
            acc[k].add_assign_ref(&v[k].mul(s));
        }
    }
}

fn dot(u: &Vec3, v: &Vec3) -> P5 {
    // Gram table of (R_vec, r_vec, e_Z)
    let g = |a: usize, b: usize| -> P5 {
        match (a.min(b), a.max(b)) {
            (0, 0) => mono5([2, 0, 0, 0, 0], rat(1, 1)),
            (0, 1) => mono5([1, 0, 1, 0, 0], rat(1, 1)),
            (1, 1) => &mono5([0, 2, 0, 0, 0], rat(1, 1)) + &mono5([0, 0, 2, 0, 0], rat(1, 1)),
            (0, 2) => mono5([0, 0, 0, 1, 0], rat(1, 1)),
            (1, 2) => mono5([0, 0, 0, 0, 1], rat(1, 1)),
            _ => P5::one(),
        }
    };
    let mut out = P5::zero();
    for a in 0..3 {
        if u[a].is_zero() {
            continue;
        }
        for b in 0..3 {
            if v[b].is_zero() {
                continue;
            }
            out.add_assign_ref(&u[a].mul(&v[b]).mul(&g(a, b)));
        }
    }
    out
}

/// Gradients of the radial coordinates `(R, rho, zeta)` with respect to one Jacobi vector.
fn coordinate_gradients(wrt: Wrt) -> [Vec3; 3] {
    let one = rat(1, 1);
    match wrt {
        Wrt::Nuclear => {
            // grad_R zeta = r/R - zeta R/R^2, grad_R rho = -(zeta/rho) grad_R zeta
            let gz = [
                mono5([-2, 0, 1, 0, 0], -one.clone()),
                mono5([-1, 0, 0, 0, 0], one.clone()),
                P5::zero(),
            ];
            let f = mono5([0, -1, 1, 0, 0], -one.clone());
            let gr = [gz[0].mul(&f), gz[1].mul(&f), P5::zero()];
            let gcap = [mono5([-1, 0, 0, 0, 0], one), P5::zero(), P5::zero()];
            [gcap, gr, gz]
        }
        Wrt::Electron => {
            // grad_r zeta = R/R, grad_r rho = (r - zeta R/R)/rho
            let gz = [mono5([-1, 0, 0, 0, 0], one.clone()), P5::zero(), P5::zero()];
            let gr = [
                mono5([-1, -1, 1, 0, 0], -one.clone()),
                mono5([0, -1, 0, 0, 0], one),
                P5::zero(),
            ];
            [vzero(), gr, gz]
        }
    }
}

/// Gradient of a scalar coefficient (including its explicit `R_Z`, `r_Z` dependence).
fn grad_scalar(p: &P5, wrt: Wrt, cg: &[Vec3; 3]) -> Vec3 {
    let mut out = vzero();
    for (var, g) in [R, RHO, ZETA].iter().zip(cg.iter()) {
        let d = p.derivative(*var);
        if !d.is_zero() {
            vadd_scaled(&mut out, g, &d);
        }
    }
    let (lab, slot) = match wrt {
        Wrt::Nuclear => (RZ, 2),
        Wrt::Electron => (LZ, 2),
    };
    let d = p.derivative(lab);
    out[slot].add_assign_ref(&d);
    out
}

type Expr = BTreeMap<(usize, Deriv), P5>;
type VExpr = BTreeMap<(usize, Deriv), Vec3>;

fn bump(d: Deriv, var: usize) -> Deriv {
    let mut e = d;
    e[var] += 1;
    e
}

fn grad(expr: &Expr, wrt: Wrt) -> VExpr {
    let cg = coordinate_gradients(wrt);
    let mut out: VExpr = BTreeMap::new();
    let mut push = |key: (usize, Deriv), v: Vec3| {
        let slot = out.entry(key).or_insert_with(vzero);
        for k in 0..3 {
            slot[k].add_assign_ref(&v[k]);
        }
    };
    for (&(i, d), c) in expr {
        push((i, d), grad_scalar(c, wrt, &cg));
        for var in 0..3 {
            let mut v = vzero();
            vadd_scaled(&mut v, &cg[var], c);
            if v.iter().any(|x| !x.is_zero()) {
                push((i, bump(d, var)), v);
            }
        }
    }
    out
}

fn div(vexpr: &VExpr, wrt: Wrt) -> Expr {
    let cg = coordinate_gradients(wrt);
    // divergence of the basis vectors (R_vec, r_vec, e_Z)
    let basis_div = match wrt {
        Wrt::Nuclear => [rat(3, 1), rat(0, 1), rat(0, 1)],
        Wrt::Electron => [rat(0, 1), rat(3, 1), rat(0, 1)],
    };
    let mut basis = [vzero(), vzero(), vzero()];
    for (k, b) in basis.iter_mut().enumerate() {
        b[k] = P5::one();
    }
    let mut out: Expr = BTreeMap::new();
    let mut push = |key: (usize, Deriv), p: P5| {
        if !p.is_zero() {
            let slot = out.entry(key).or_insert_with(P5::zero);
            slot.add_assign_ref(&p);
        }
    };
    for (&(i, d), v) in vexpr {
        for k in 0..3 {
            if v[k].is_zero() {
                continue;
            }
            let g = grad_scalar(&v[k], wrt, &cg);
            push((i, d), dot(&g, &basis[k]));
            push((i, d), v[k].scale(&basis_div[k]));
        }
        for var in 0..3 {
            push((i, bump(d, var)), dot(v, &cg[var]));
        }
    }
    out.retain(|_, p| !p.is_zero());
    out
}

fn add_expr(acc: &mut Expr, e: &Expr, s: &Rational) {
    for (k, p) in e {
        let slot = acc.entry(*k).or_insert_with(P5::zero);
        slot.add_scaled(p, s);
    }
    acc.retain(|_, p| !p.is_zero());
}

/// Angular functions in terms of `(R, rho, zeta, R_Z, r_Z)`.
fn angular_functions(j: u32) -> Result<Vec<P5>> {
    let one = rat(1, 1);
    let c = mono5([-1, 0, 0, 1, 0], one.clone());
    let s = &mono5([0, -1, 0, 0, 1], one.clone()) - &mono5([-1, -1, 1, 1, 0], one.clone());
    Ok(match j {
        0 => vec![P5::one()],
        1 => vec![c, s],
        2 => {
            let c2 = c.mul(&c);
            let s2 = s.mul(&s);
            let a0 = &c2.scale(&rat(3, 2)) - &p5_const(rat(1, 2));
            let a1 = c.mul(&s);
            let a2 = &(&s2 + &c2.scale(&rat(1, 2))) - &p5_const(rat(1, 2));
            vec![a0, a1, a2]
        }
        _ => return Err(Error::UnsupportedSymmetry { j }),
    })
}

/// Rewrite `R_Z = R c` and `r_Z = zeta c + rho s`; slots 3 and 4 then hold `c` and `s`.
fn to_angles(p: &P5) -> P5 {
    let one = rat(1, 1);
    let lz = &mono5([0, 0, 1, 1, 0], one.clone()) + &mono5([0, 1, 0, 0, 1], one);
    let mut out = P5::zero();
    for (e, coef) in p.terms() {
        let base = mono5([e[0] + e[3], e[1], e[2], e[3], 0], coef.clone());
        out.add_assign_ref(&base.mul(&lz.pow(e[4] as u32)));
    }
    out
}

fn radial_part(p: &P5, c_exp: i32, s_exp: i32) -> P3 {
    let mut out = P3::zero();
    for (e, coef) in p.terms() {
        if e[3] == c_exp && e[4] == s_exp {
            out.add_term([e[0], e[1], e[2]], coef.clone());
        }
    }
    out
}

/// Split a function of `(c, s)` into components along the angular functions.
fn project(p: &P5, j: u32) -> Result<Vec<P3>> {
    let allowed: &[(i32, i32)] = match j {
        0 => &[(0, 0)],
        1 => &[(1, 0), (0, 1)],
        _ => &[(2, 0), (1, 1), (0, 2), (0, 0)],
    };
    for (e, _) in p.terms() {
        if !allowed.contains(&(e[3], e[4])) {
            return Err(Error::Derivation(format!(
                "angular component c^{} s^{} outside the J={j} manifold",
                e[3], e[4]
            )));
        }
    }
    match j {
        0 => Ok(vec![radial_part(p, 0, 0)]),
        1 => Ok(vec![radial_part(p, 1, 0), radial_part(p, 0, 1)]),
        _ => {
            let a = radial_part(p, 2, 0);
            let b = radial_part(p, 1, 1);
            let d = radial_part(p, 0, 2);
            let e = radial_part(p, 0, 0);
            let rank0 = &(&a + &d).scale(&rat(1, 3)) + &e;
            if !rank0.is_zero() {
                return Err(Error::Derivation(format!(
                    "nonzero scalar component {rank0} in a D-state projection"
                )));
            }
            let c0 = (&a.scale(&rat(2, 1)) - &d).scale(&rat(1, 3));
            Ok(vec![c0, b, d])
        }
    }
}

fn kinetic_expr(channel: Channel, psi: &Expr) -> Expr {
    let lap = |w: Wrt| div(&grad(psi, w), w);
    let mut out = Expr::new();
    match channel {
        Channel::Electron => add_expr(&mut out, &lap(Wrt::Electron), &rat(-1, 2)),
        Channel::Nuclear => {
            add_expr(&mut out, &lap(Wrt::Nuclear), &rat(-1, 2));
            add_expr(&mut out, &lap(Wrt::Electron), &rat(-1, 8));
        }
        Channel::SymmetryBreaking => {
            let mixed = div(&grad(psi, Wrt::Nuclear), Wrt::Electron);
            add_expr(&mut out, &mixed, &rat(-1, 2));
        }
        _ => {}
    }
    out
}

/// Insert the M=0 angular ansatz into the kinetic operator and project on the
/// angular functions.
pub fn angular_reduce(j: u32) -> Result<RadialOperator> {
    let ang = angular_functions(j)?;
    let n = ang.len();
    let mut channels = Vec::new();
    for ch in [
        Channel::Electron,
        Channel::Nuclear,
        Channel::SymmetryBreaking,
    ] {
        let mut m = vec![vec![DiffOp::new(); n]; n];
        for (i, a) in ang.iter().enumerate() {
            let mut psi = Expr::new();
            psi.insert((i, [0, 0, 0]), a.clone());
            for (&(src, d), coef) in &kinetic_expr(ch, &psi) {
                let comps = project(&to_angles(coef), j)?;
                for (row, c) in comps.into_iter().enumerate() {
                    if !c.is_zero() {
                        let slot = m[row][src].entry(d).or_insert_with(P3::zero);
                        slot.add_assign_ref(&c);
                    }
                }
            }
            for row in m.iter_mut() {
                row[i].retain(|_, p| !p.is_zero());
            }
        }
        channels.push((ch, m));
    }
    channels.push((Channel::Coulomb, identity(n)));
    Ok(RadialOperator { j, channels })
}

fn identity(n: usize) -> Vec<Vec<DiffOp>> {
    let mut m = vec![vec![DiffOp::new(); n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i].insert([0, 0, 0], P3::one());
    }
    m
}

/// Factorization matrix `C` with `Phi = C f`, entries polynomial in `(R, rho, zeta)`.
pub fn factor_matrix(j: u32) -> Result<Vec<Vec<P3>>> {
    let v = |i: usize| P3::var(i);
    let half = rat(1, 2);
    let ap = &v(ZETA) + &v(R).scale(&half); // zeta + R/2
    let am = &v(ZETA) - &v(R).scale(&half); // zeta - R/2
    let rho = v(RHO);
    Ok(match j {
        0 => vec![vec![P3::one()]],
        1 => vec![vec![ap, am], vec![rho.clone(), rho]],
        2 => {
            let rho2h = rho.mul(&rho).scale(&half);
            let prod = &ap.mul(&am) - &rho2h; // zeta^2 - R^2/4 - rho^2/2
            let three = rat(3, 1);
            let r1 = rho.scale(&three);
            vec![
                vec![&ap.mul(&ap) - &rho2h, &am.mul(&am) - &rho2h, prod],
                vec![r1.mul(&ap), r1.mul(&am), r1.mul(&v(ZETA))],
                vec![
                    rho2h.scale(&three),
                    rho2h.scale(&three),
                    rho2h.scale(&three),
                ],
            ]
        }
        _ => return Err(Error::UnsupportedSymmetry { j }),
    })
}

fn det_and_adjugate(c: &[Vec<P3>]) -> (P3, Vec<Vec<P3>>) {
    match c.len() {
        1 => (c[0][0].clone(), vec![vec![P3::one()]]),
        2 => {
            let det = &c[0][0].mul(&c[1][1]) - &c[0][1].mul(&c[1][0]);
            let adj = vec![
                vec![c[1][1].clone(), -&c[0][1]],
                vec![-&c[1][0], c[0][0].clone()],
            ];
            (det, adj)
        }
        _ => {
            let cof = |r: usize, col: usize| -> P3 {
                let rows: Vec<usize> = (0..3).filter(|&x| x != r).collect();
                let cols: Vec<usize> = (0..3).filter(|&x| x != col).collect();
                let m = &c[rows[0]][cols[0]].mul(&c[rows[1]][cols[1]])
                    - &c[rows[0]][cols[1]].mul(&c[rows[1]][cols[0]]);
                if (r + col).is_multiple_of(2) {
                    m
                } else {
                    -&m
                }
            };
            let mut adj = vec![vec![P3::zero(); 3]; 3];
            for (r, row) in adj.iter_mut().enumerate() {
                for (col, slot) in row.iter_mut().enumerate() {
                    *slot = cof(col, r);
                }
            }
            let mut det = P3::zero();
            for k in 0..3 {
                det.add_assign_ref(&c[0][k].mul(&cof(0, k)));
            }
            (det, adj)
        }
    }
}

fn binom(n: u8, k: u8) -> i64 {
    let mut r = 1i64;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

/// Compose a differential operator with multiplication by `p`: returns `op . p`.
fn compose_mul(op: &DiffOp, p: &P3) -> DiffOp {
    let mut out = DiffOp::new();
    for (d, coef) in op {
        for e0 in 0..=d[0] {
            for e1 in 0..=d[1] {
                for e2 in 0..=d[2] {
                    let mut dp = p.clone();
                    for (var, n) in [(0, d[0] - e0), (1, d[1] - e1), (2, d[2] - e2)] {
                        for _ in 0..n {
                            dp = dp.derivative(var);
                        }
                    }
                    if dp.is_zero() {
                        continue;
                    }
                    let b = binom(d[0], e0) * binom(d[1], e1) * binom(d[2], e2);
                    let term = coef.mul(&dp).scale(&rat(b, 1));
                    let slot = out.entry([e0, e1, e2]).or_insert_with(P3::zero);
                    slot.add_assign_ref(&term);
                }
            }
        }
    }
    out.retain(|_, p| !p.is_zero());
    out
}

/// Substitute the factorization `Phi = C f` and return `C^{-1} L C`, checking that
/// every centrifugal term cancels.
pub fn factorize(op: &RadialOperator) -> Result<RadialOperator> {
    let c = factor_matrix(op.j)?;
    let n = c.len();
    if n != op.dim() {
        return Err(Error::Derivation("factorization size mismatch".into()));
    }
    let (det, adj) = det_and_adjugate(&c);
    if det.len() != 1 {
        return Err(Error::Derivation(format!(
            "determinant {det} is not a monomial"
        )));
    }
    let (de, dc) = det.terms().next().map(|(e, c)| (*e, c.clone())).unwrap();
    let inv_det = P3::monomial([-de[0], -de[1], -de[2]], num_traits::Inv::inv(dc));
    let mut channels = Vec::new();
    for (ch, l) in &op.channels {
        // (L C)_{jk} = sum_i L_ji . C_ik
        let mut lc = vec![vec![DiffOp::new(); n]; n];
        for (jr, lrow) in l.iter().enumerate() {
            for (k, slot) in lc[jr].iter_mut().enumerate() {
                for (i, lop) in lrow.iter().enumerate() {
                    if lop.is_empty() || c[i][k].is_zero() {
                        continue;
                    }
                    for (d, p) in compose_mul(lop, &c[i][k]) {
                        slot.entry(d).or_insert_with(P3::zero).add_assign_ref(&p);
                    }
                }
            }
        }
        let mut m = vec![vec![DiffOp::new(); n]; n];
        for (r, mrow) in m.iter_mut().enumerate() {
            for (k, slot) in mrow.iter_mut().enumerate() {
                for (jr, lcrow) in lc.iter().enumerate() {
                    if adj[r][jr].is_zero() {
                        continue;
                    }
                    let f = adj[r][jr].mul(&inv_det);
                    for (d, p) in &lcrow[k] {
                        slot.entry(*d)
                            .or_insert_with(P3::zero)
                            .add_assign_ref(&p.mul(&f));
                    }
                }
                slot.retain(|_, p| !p.is_zero());
            }
        }
        channels.push((*ch, m));
    }
    let out = RadialOperator { j: op.j, channels };
    let residual = out.centrifugal_terms();
    if let Some((ch, r, col, p)) = residual.first() {
        return Err(Error::Derivation(format!(
            "centrifugal term survives factorization in {ch:?} block ({r},{col}): {p}"
        )));
    }
    Ok(out)
}

/// `sum_i A_i C_ik` for each factorized unknown `k`, in `(R, rho, zeta, R_Z, r_Z)`.
/// Used to relate the factorized unknowns to solid harmonics of the
/// electron-nucleus vectors.
pub fn factorized_prefactors(j: u32) -> Result<Vec<Laurent<5>>> {
    let ang = angular_functions(j)?;
    let c = factor_matrix(j)?;
    let lift = |p: &P3| -> P5 {
        let mut q = P5::zero();
        for (e, coef) in p.terms() {
            q.add_term([e[0], e[1], e[2], 0, 0], coef.clone());
        }
        q
    };
    Ok((0..ang.len())
        .map(|k| {
            let mut t = P5::zero();
            for (i, a) in ang.iter().enumerate() {
                t.add_assign_ref(&a.mul(&lift(&c[i][k])));
            }
            t
        })
        .collect())
}
