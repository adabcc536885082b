//! Gauss-Laguerre quadrature, pointwise Sturmian functions and the matrix
//! oracles built on them.
#![allow(dead_code)]

use molion::algebra::{Channel, EffectiveHamiltonian};
use molion::assembly::BandedPair;
use molion::eigensolver::Problem;
use molion::sturmian::SturmianIndex;
use nalgebra::{DMatrix, SymmetricEigen};
use twofloat::TwoFloat;

/// Nodes `t_i` and modified weights `W_i = w_i e^{t_i}` of the `q`-point
/// Gauss-Laguerre rule, so that `int_0^inf f(t) dt ~ sum W_i f(t_i)` whenever
/// `f(t) e^t` is a polynomial of degree below `2q`.
pub fn gauss_laguerre(q: usize) -> (Vec<f64>, Vec<f64>) {
    // Golub-Welsch: eigenvalues of the Jacobi matrix of the Laguerre recurrence
    let jac = DMatrix::from_fn(q, q, |i, j| {
        if i == j {
            (2 * i + 1) as f64
        } else if i.abs_diff(j) == 1 {
            i.max(j) as f64
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights = Vec::with_capacity(q);
    for t in nodes.iter_mut() {
        // Newton on L_q; the exponential factor cancels in the ratio
        for _ in 0..3 {
            let psi = scaled_laguerre(q, *t);
            let d = q as f64 * (psi[q] - psi[q - 1]) / *t;
            *t -= psi[q] / d;
        }
        let psi = scaled_laguerre(q + 1, *t);
        let qq = (q + 1) as f64;
        weights.push(*t / (qq * qq * psi[q + 1] * psi[q + 1]));
    }
    (nodes, weights)
}

/// `L_n(t) e^{-t/2}` for `n = 0..=nmax`.
pub fn scaled_laguerre(nmax: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    let e = (-t / 2.0).exp();
    out.push(e);
    if nmax >= 1 {
        out.push((1.0 - t) * e);
    }
    for k in 1..nmax {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - t) * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Unscaled Sturmian functions `phi_n(t) = (-1)^n L_n(t) e^{-t/2}` and their
/// derivatives, for `n = 0..=nmax`.
pub fn sturmian_values(nmax: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let psi = scaled_laguerre(nmax, t);
    let mut val = Vec::with_capacity(nmax + 1);
    let mut der = Vec::with_capacity(nmax + 1);
    // L_n' = -sum_{j<n} L_j
    let mut prefix = 0.0;
    for (n, p) in psi.iter().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        val.push(sign * p);
        der.push(sign * (-prefix - p / 2.0));
        prefix += p;
    }
    (val, der)
}

/// One axis of a scaled tensor-product rule: points `u_i = t_i / s`, weights
/// `W_i / s`, and `sqrt(s) phi_n(s u)` with its `u`-derivative at each point.
pub struct AxisRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// `values[i][n]`
    pub values: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
}

impl AxisRule {
    pub fn new(q: usize, scale: f64, nmax: usize) -> Self {
        let (t, w) = gauss_laguerre(q);
        let mut values = Vec::new();
        let mut derivs = Vec::new();
        for &ti in &t {
            let (v, d) = sturmian_values(nmax, ti);
            values.push(v.iter().map(|x| scale.sqrt() * x).collect());
            derivs.push(d.iter().map(|x| scale.powf(1.5) * x).collect());
        }
        Self {
            points: t.iter().map(|x| x / scale).collect(),
            weights: w.iter().map(|x| x / scale).collect(),
            values,
            derivs,
        }
    }

    /// `int [d^dl phi_m] u^k [d^dr phi_n] du` and the sum of absolute terms.
    pub fn integral(&self, m: usize, n: usize, k: u32, dl: bool, dr: bool) -> (f64, f64) {
        let mut s = 0.0;
        let mut mag = 0.0;
        for i in 0..self.points.len() {
            let a = if dl {
                self.derivs[i][m]
            } else {
                self.values[i][m]
            };
            let b = if dr {
                self.derivs[i][n]
            } else {
                self.values[i][n]
            };
            let v = self.weights[i] * a * b * self.points[i].powi(k as i32);
            s += v;
            mag += v.abs();
        }
        (s, mag)
    }
}

/// Unit-scale Gauss-Laguerre rule carried in double-double arithmetic, for
/// oracles at large `n` where the `f64` rule's own rounding is near `1e-12`.
pub struct DdRule {
    weights: Vec<TwoFloat>,
    points: Vec<TwoFloat>,
    values: Vec<Vec<TwoFloat>>,
    derivs: Vec<Vec<TwoFloat>>,
}

/// `L_n(t) c` for `n = 0..=nmax`; the common factor `c` cancels in the rule.
fn dd_laguerre(nmax: usize, t: TwoFloat, c: f64) -> Vec<TwoFloat> {
    let mut out = vec![TwoFloat::from(c), (1.0 - t) * c];
    for k in 1..nmax {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - t) * out[k] - out[k - 1] * kf) / (kf + 1.0);
        out.push(next);
    }
    out.truncate(nmax + 1);
    out
}

impl DdRule {
    pub fn new(q: usize, nmax: usize) -> Self {
        let (nodes, _) = gauss_laguerre(q);
        let mut rule = DdRule {
            weights: vec![],
            points: vec![],
            values: vec![],
            derivs: vec![],
        };
        for t0 in nodes {
            // any common factor works, the weight is a ratio of scaled values
            let c = (-t0 / 2.0).exp();
            let mut t = TwoFloat::from(t0);
            for _ in 0..2 {
                let psi = dd_laguerre(q, t, c);
                let d = (psi[q] - psi[q - 1]) * q as f64 / t;
                t -= psi[q] / d;
            }
            let psi = dd_laguerre(q + 1, t, c);
            let qq = (q + 1) as f64;
            rule.weights.push(t / (psi[q + 1] * psi[q + 1] * (qq * qq)));
            let mut prefix = TwoFloat::from(0.0);
            let (mut val, mut der) = (Vec::new(), Vec::new());
            for (n, p) in psi.iter().take(nmax + 1).enumerate() {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                val.push(*p * sign);
                der.push((-prefix - *p / 2.0) * sign);
                prefix += *p;
            }
            rule.points.push(t);
            rule.values.push(val);
            rule.derivs.push(der);
        }
        rule
    }

    /// Same contract as [`AxisRule::integral`] at unit scale.
    pub fn integral(&self, m: usize, n: usize, k: u32, dl: bool, dr: bool) -> (f64, f64) {
        let mut s = TwoFloat::from(0.0);
        let mut mag = 0.0;
        for i in 0..self.points.len() {
            let a = if dl {
                self.derivs[i][m]
            } else {
                self.values[i][m]
            };
            let b = if dr {
                self.derivs[i][n]
            } else {
                self.values[i][n]
            };
            let v = self.weights[i] * a * b * self.points[i].powi(k as i32);
            s += v;
            mag += v.hi().abs();
        }
        (s.hi() + s.lo(), mag)
    }
}

pub fn slot(ch: Channel) -> usize {
    match ch {
        Channel::Electron | Channel::Coulomb => 0,
        Channel::Nuclear => 1,
        Channel::SymmetryBreaking => 2,
        Channel::Overlap => 3,
    }
}

/// Pair matrices back in the unnormalized sector basis: `[a_electron, a_nuclear, a_symbreak, b]`.
pub fn raw_pair(p: &BandedPair) -> Vec<DMatrix<f64>> {
    [&p.a_electron, &p.a_nuclear, &p.a_symbreak, &p.b]
        .iter()
        .map(|m| DMatrix::from_fn(p.dim(), p.dim(), |i, j| m.get(i, j) * p.norm[i] * p.norm[j]))
        .collect()
}

/// Every operator term integrated by the tensor Gauss-Laguerre rule. With
/// `skip_coulomb` the Coulomb channel is left out of slot 0.
pub fn term_oracle(
    p: &BandedPair,
    ham: &EffectiveHamiltonian,
    skip_coulomb: bool,
) -> Vec<DMatrix<f64>> {
    let nmax = p.meta.n as usize;
    let rules = [
        AxisRule::new(16, p.meta.scales.alpha, nmax),
        AxisRule::new(16, p.meta.scales.beta, nmax),
    ];
    let dim = p.dim();
    let mut out: Vec<DMatrix<f64>> = (0..4).map(|_| DMatrix::zeros(dim, dim)).collect();
    for i in 0..dim {
        for j in 0..dim {
            let (bi, bj) = (p.basis.states[i].block, p.basis.states[j].block);
            for t in ham.terms.iter().filter(|t| t.row == bi && t.col == bj) {
                if skip_coulomb && t.channel == Channel::Coulomb {
                    continue;
                }
                let c = molion::algebra::poly::rat_to_f64(&t.coeff);
                let mut v = 0.0;
                for (wl, ql) in p.basis.expansion(i) {
                    for (wr, qr) in p.basis.expansion(j) {
                        let qr: SturmianIndex = if t.swap { qr.swapped() } else { qr };
                        let mut prod = wl * wr;
                        for a in 0..3 {
                            let (val, _) = rules[a.min(1)].integral(
                                ql.axis(a) as usize,
                                qr.axis(a) as usize,
                                t.exps[a],
                                t.left == Some(a as u8),
                                t.right == Some(a as u8),
                            );
                            prod *= val;
                        }
                        v += prod;
                    }
                }
                out[slot(t.channel)][(i, j)] += c * v;
            }
        }
    }
    out
}

/// Genuine 3D quadrature of `f_i f_j w(x, y, z)` over the sector basis.
pub fn weight_oracle(p: &BandedPair, w: impl Fn(f64, f64, f64) -> f64) -> DMatrix<f64> {
    let nmax = p.meta.n as usize;
    let rx = AxisRule::new(16, p.meta.scales.alpha, nmax);
    let ry = AxisRule::new(16, p.meta.scales.beta, nmax);
    let dim = p.dim();
    let mut m = DMatrix::zeros(dim, dim);
    let mut f = vec![0.0; dim];
    let exp: Vec<_> = (0..dim).map(|i| p.basis.expansion(i)).collect();
    for a in 0..rx.points.len() {
        for b in 0..ry.points.len() {
            for c in 0..ry.points.len() {
                let (x, y, z) = (rx.points[a], ry.points[b], ry.points[c]);
                let weight = rx.weights[a] * ry.weights[b] * ry.weights[c] * w(x, y, z);
                for (i, fi) in f.iter_mut().enumerate() {
                    *fi = exp[i]
                        .iter()
                        .map(|&(wt, q)| {
                            wt * rx.values[a][q.nx as usize]
                                * ry.values[b][q.ny as usize]
                                * ry.values[c][q.nz as usize]
                        })
                        .sum();
                }
                for i in 0..dim {
                    for j in 0..dim {
                        m[(i, j)] += weight * f[i] * f[j];
                    }
                }
            }
        }
    }
    m
}

/// Generalized eigenvalues of the dense pencil by Cholesky reduction.
pub fn dense_eigenvalues(p: &Problem) -> Vec<f64> {
    let n = p.dim();
    let a = DMatrix::from_fn(n, n, |i, j| p.a.get(i, j));
    let b = DMatrix::from_fn(n, n, |i, j| p.b.get(i, j));
    let l = b.clone().cholesky().expect("B is positive definite").l();
    let linv = l.try_inverse().unwrap();
    let c = &linv * &a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    // Rayleigh quotients of the back-transformed vectors, accumulated in
    // double-double: the reduction's rounding grows with cond(B), and the
    // quotient cancels by several digits in f64 when B is ill conditioned
    let x = linv.transpose() * eig.eigenvectors;
    let quadratic = |m: &DMatrix<f64>, x: &[f64]| {
        let mut acc = TwoFloat::from(0.0);
        for i in 0..n {
            for k in 0..n {
                acc += TwoFloat::new_mul(x[i], x[k]) * m[(i, k)];
            }
        }
        acc
    };
    let mut e: Vec<f64> = x
        .column_iter()
        .map(|c| {
            let c: Vec<f64> = c.iter().copied().collect();
            f64::from(quadratic(&a, &c) / quadratic(&b, &c))
        })
        .collect();
    e.sort_by(f64::total_cmp);
    e
}
