//! Shift-invert Lanczos for the banded generalized problem `A x = E B x`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{EffectiveHamiltonian, ExchangeSector};
use crate::assembly::{assemble, BandedPair};
use crate::banded::{dot, BandedCholesky, BandedLdlt, BandedMatrix};
use crate::error::{Error, Result};
use crate::sturmian::ScaleParams;
use crate::systems::ReducedMasses;

/// A symmetric-definite pencil with its symmetry labels.
#[derive(Debug, Clone)]
pub struct Problem {
    pub a: BandedMatrix,
    pub b: BandedMatrix,
    pub j: u32,
    pub sector: ExchangeSector,
}

impl Problem {
    pub fn new(a: BandedMatrix, b: BandedMatrix, j: u32, sector: ExchangeSector) -> Result<Self> {
        if a.dim() != b.dim() || a.width() != b.width() {
            return Err(Error::Assembly("A and B have different shapes".into()));
        }
        Ok(Self { a, b, j, sector })
    }

    pub fn from_pair(pair: &BandedPair, masses: &ReducedMasses) -> Self {
        Self {
            a: pair.a(masses),
            b: pair.b.clone(),
            j: pair.meta.j,
            sector: pair.meta.sector,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    /// Residual `||A x - E B x||` for `x` normalized to `x^T B x = 1`.
    pub fn residual(&self, x: &[f64], e: f64) -> f64 {
        let ax = self.a.mul(x);
        let bx = self.b.mul(x);
        let norm = dot(x, &bx).sqrt();
        ax.iter()
            .zip(&bx)
            .map(|(p, q)| (p - e * q).powi(2))
            .sum::<f64>()
            .sqrt()
            / norm
    }

    pub fn rayleigh(&self, x: &[f64]) -> f64 {
        f64::from(self.a.quadratic_form_dd(x) / self.b.quadratic_form_dd(x))
    }

    fn shifted(&self, sigma: f64) -> BandedMatrix {
        BandedMatrix::combine(&[(1.0, &self.a), (-sigma, &self.b)])
    }

    /// Number of eigenvalues below `mu`, from the inertia of `A - mu B`.
    pub fn count_below(&self, mu: f64) -> Result<usize> {
        Ok(self.shifted(mu).ldlt(mu)?.negative_count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMode {
    /// Lowest levels above `lower_bound`, which must lie below the spectrum.
    Window { lower_bound: f64 },
    /// Levels nearest `target`.
    Shifted { target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveRequest {
    pub mode: SolveMode,
    pub count: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Inverse-iteration steps allowed per level when the Ritz residual misses the tolerance.
    pub polish_steps: usize,
    /// Levels above this energy are not polished.
    pub polish_ceiling: f64,
}

/// Strictly below every hydrogen molecular ion level, so that `A - sigma B` is definite.
pub const DEFAULT_LOWER_BOUND: f64 = -0.7;

impl SolveRequest {
    pub fn window(count: usize) -> Self {
        Self {
            mode: SolveMode::Window {
                lower_bound: DEFAULT_LOWER_BOUND,
            },
            count,
            max_iterations: 600,
            tolerance: 1e-10,
            seed: 0x5eed,
            polish_steps: 3,
            polish_ceiling: f64::INFINITY,
        }
    }

    pub fn shifted(target: f64, count: usize) -> Self {
        Self {
            mode: SolveMode::Shifted { target },
            ..Self::window(count)
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain("tolerance must be positive".into()));
        }
        if self.count == 0 || self.count > dim {
            return Err(Error::Domain(format!(
                "cannot request {} levels of a problem of dimension {dim}",
                self.count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub v: usize,
    pub j: u32,
    pub sector: ExchangeSector,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub shift: f64,
    pub converged: bool,
    pub converged_digits: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub levels: Vec<LevelResult>,
    /// Eigenvectors normalized to `x^T B x = 1`, in the order of `levels`.
    pub vectors: Vec<Vec<f64>>,
}

enum Factor {
    Definite(BandedCholesky),
    Indefinite(BandedLdlt),
}

impl Factor {
    fn solve_in_place(&self, x: &mut [f64]) {
        match self {
            Factor::Definite(f) => f.solve_in_place(x),
            Factor::Indefinite(f) => f.solve_in_place(x),
        }
    }
}

struct Ritz {
    theta: f64,
    estimate: f64,
    vector: Vec<f64>,
}

/// Lanczos on `K = (A - sigma B)^{-1} B` in the `B` inner product with full
/// reorthogonalization. Returns the `want` Ritz pairs of largest `|theta|`
/// (largest `theta` when `positive_only`).
fn lanczos(
    p: &Problem,
    factor: &Factor,
    want: usize,
    positive_only: bool,
    req: &SolveRequest,
) -> (Vec<Ritz>, usize) {
    let n = p.dim();
    let max_steps = req.max_iterations.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut bbasis: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut bv = p.b.mul(&v);
    let norm = dot(&v, &bv).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    bv.iter_mut().for_each(|x| *x /= norm);
    let mut last: Option<(Vec<f64>, DMatrix<f64>, f64)> = None;
    for step in 0..max_steps {
        let mut u = bv.clone();
        factor.solve_in_place(&mut u);
        let a = dot(&bv, &u);
        basis.push(v);
        bbasis.push(bv);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for (q, bq) in basis.iter().zip(&bbasis) {
                let c = dot(bq, &u);
                u.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        alpha.push(a);
        let mut bu = p.b.mul(&u);
        let b = dot(&u, &bu).max(0.0).sqrt();
        let m = step + 1;
        let check = m >= want.min(max_steps) && (m % 5 == 0 || m == max_steps || b == 0.0);
        if check {
            let mut t = DMatrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            let key = |i: usize| {
                let th = eig.eigenvalues[i];
                if positive_only {
                    -th
                } else {
                    -th.abs()
                }
            };
            order.sort_by(|x, y| key(*x).total_cmp(&key(*y)));
            let done = order.iter().take(want).all(|&i| {
                let th = eig.eigenvalues[i];
                (b * eig.eigenvectors[(m - 1, i)]).abs() <= 1e-14 * th.abs()
                    && (!positive_only || th > 0.0)
            });
            let thetas: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let mut vecs = DMatrix::zeros(m, m);
            for (c, &i) in order.iter().enumerate() {
                vecs.set_column(c, &eig.eigenvectors.column(i));
            }
            last = Some((thetas, vecs, b));
            if done || b < 1e-300 {
                break;
            }
        }
        if b < 1e-300 {
            break;
        }
        beta.push(b);
        u.iter_mut().for_each(|x| *x /= b);
        bu.iter_mut().for_each(|x| *x /= b);
        v = u;
        bv = bu;
    }
    let steps = basis.len();
    let (thetas, vecs, b) = last.expect("at least one Ritz check runs");
    let m = vecs.nrows();
    let out = (0..want.min(m))
        .map(|c| {
            let mut x = vec![0.0; n];
            for k in 0..m {
                let s = vecs[(k, c)];
                x.iter_mut().zip(&basis[k]).for_each(|(a, q)| *a += s * q);
            }
            Ritz {
                theta: thetas[c],
                estimate: (b * vecs[(m - 1, c)]).abs(),
                vector: x,
            }
        })
        .collect();
    (out, steps)
}

fn b_normalize(p: &Problem, x: &mut [f64]) {
    let n = p.b.bilinear(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

/// Improve a pair by inverse iteration with Rayleigh-quotient updates.
fn polish(p: &Problem, x: &mut Vec<f64>, e: &mut f64, steps: usize, tol: f64) -> f64 {
    let mut res = p.residual(x, *e);
    for _ in 0..steps {
        if res <= tol {
            break;
        }
        let Ok(f) = p.shifted(*e).ldlt(*e) else { break };
        let mut y = p.b.mul(x);
        f.solve_in_place(&mut y);
        b_normalize(p, &mut y);
        let ey = p.rayleigh(&y);
        let ry = p.residual(&y, ey);
        if ry >= res {
            break;
        }
        *x = y;
        *e = ey;
        res = ry;
    }
    res
}

/// Solve for `req.count` eigenpairs. Every returned level carries an
/// independently recomputed residual.
pub fn solve(p: &Problem, req: &SolveRequest) -> Result<Solution> {
    req.validate(p.dim())?;
    let (sigma, factor, positive_only, below) = match req.mode {
        SolveMode::Window { lower_bound } => {
            let f = p.shifted(lower_bound).cholesky().map_err(|_| {
                Error::Domain(format!(
                    "window lower bound {lower_bound} is not below the spectrum"
                ))
            })?;
            (lower_bound, Factor::Definite(f), true, 0)
        }
        SolveMode::Shifted { target } => {
            let f = p.shifted(target).ldlt(target)?;
            let below = f.negative_count();
            (target, Factor::Indefinite(f), false, below)
        }
    };
    let (ritz, iterations) = lanczos(p, &factor, req.count, positive_only, req);
    let mut found: Vec<(f64, f64, Vec<f64>, bool)> = Vec::new();
    for r in ritz {
        let mut x = r.vector;
        b_normalize(p, &mut x);
        let mut e = p.rayleigh(&x);
        let mut res = p.residual(&x, e);
        if res > req.tolerance && req.polish_steps > 0 && e < req.polish_ceiling {
            res = polish(p, &mut x, &mut e, req.polish_steps, req.tolerance);
        }
        let converged = res <= req.tolerance && r.estimate.is_finite() && r.theta != 0.0;
        found.push((e, res, x, converged));
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    let above_start = found.iter().filter(|f| f.0 < sigma).count();
    let mut levels = Vec::with_capacity(found.len());
    let mut vectors = Vec::with_capacity(found.len());
    for (i, (e, res, x, converged)) in found.into_iter().enumerate() {
        // levels below the shift are counted down from the inertia
        let v = if i < above_start {
            below - (above_start - i)
        } else {
            below + (i - above_start)
        };
        levels.push(LevelResult {
            v,
            j: p.j,
            sector: p.sector,
            energy: e,
            residual: res,
            iterations,
            shift: sigma,
            converged,
            converged_digits: None,
        });
        vectors.push(x);
    }
    Ok(Solution { levels, vectors })
}

/// Check by inertia counting that no level below the highest converged one
/// under `ceiling` was missed: the count of eigenvalues below `E_max + margin`
/// must equal `v_max + 1`.
pub fn verify_labels(p: &Problem, sol: &Solution, margin: f64, ceiling: f64) -> Result<bool> {
    let Some(top) = sol
        .levels
        .iter()
        .rev()
        .find(|l| l.converged && l.energy < ceiling)
    else {
        return Ok(true);
    };
    Ok(p.count_below(top.energy + margin)? == top.v + 1)
}

/// Label every converged level under `ceiling` by the inertia of
/// `A - (E + margin) B`, one factorization per level. When two levels claim
/// the same label, the one with the larger residual is marked unconverged.
/// Used when [`verify_labels`] fails because a spurious Ritz value took a slot.
pub fn relabel_by_inertia(
    p: &Problem,
    sol: &mut Solution,
    margin: f64,
    ceiling: f64,
) -> Result<()> {
    for l in sol
        .levels
        .iter_mut()
        .filter(|l| l.converged && l.energy < ceiling)
    {
        l.v = p.count_below(l.energy + margin)?.saturating_sub(1);
    }
    let n = sol.levels.len();
    for i in 0..n {
        for k in i + 1..n {
            let (a, b) = (&sol.levels[i], &sol.levels[k]);
            if a.converged && b.converged && a.v == b.v {
                let worse = if a.residual > b.residual { i } else { k };
                sol.levels[worse].converged = false;
            }
        }
    }
    Ok(())
}

/// Re-solve a level with the shift placed just below its coarse energy.
pub fn shift_refine(
    p: &Problem,
    coarse: &LevelResult,
    offset: f64,
    req: &SolveRequest,
) -> Result<(LevelResult, Vec<f64>)> {
    let target = coarse.energy - offset;
    let sub = SolveRequest {
        mode: SolveMode::Shifted { target },
        count: 1,
        ..*req
    };
    let sol = solve(p, &sub)?;
    let level = sol.levels.into_iter().next().unwrap();
    if level.v != coarse.v {
        return Err(Error::InsufficientConvergence(format!(
            "refinement of v={} converged to v={}",
            coarse.v, level.v
        )));
    }
    Ok((level, sol.vectors.into_iter().next().unwrap()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub n: u32,
    pub n_x: u32,
    pub scales: ScaleParams,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    /// Scales giving the lowest ground energy at the largest `N`.
    pub best: ScaleParams,
    /// Per level, digits stable between the two largest `N` at the best scales.
    pub digits: Vec<u32>,
}

/// Number of decimal digits shared by two energies, counted after the point.
pub fn stable_digits(a: f64, b: f64) -> u32 {
    let d = (a - b).abs();
    if d == 0.0 {
        return 16;
    }
    (-d.log10()).floor().clamp(0.0, 16.0) as u32
}

/// Window solves over `N` values and an `alpha x beta` grid.
pub fn convergence_scan(
    ham: &EffectiveHamiltonian,
    species: &str,
    masses: &ReducedMasses,
    ns: &[(u32, u32)],
    grid: &[ScaleParams],
    count: usize,
) -> Result<ScanTable> {
    if ns.is_empty() || grid.is_empty() {
        return Err(Error::Domain(
            "scan needs at least one N and one grid point".into(),
        ));
    }
    let mut rows = Vec::new();
    for &scales in grid {
        for &(n, n_x) in ns {
            let pair = assemble(ham, n, n_x, scales, species)?;
            let p = Problem::from_pair(&pair, masses);
            let k = count.min(p.dim());
            let sol = solve(&p, &SolveRequest::window(k))?;
            rows.push(ScanRow {
                n,
                n_x,
                scales,
                energies: sol.levels.iter().map(|l| l.energy).collect(),
            });
        }
    }
    let n_max = ns.iter().map(|x| x.0).max().unwrap();
    let best = rows
        .iter()
        .filter(|r| r.n == n_max)
        .min_by(|a, b| a.energies[0].total_cmp(&b.energies[0]))
        .unwrap()
        .scales;
    let mut at_best: Vec<&ScanRow> = rows.iter().filter(|r| r.scales == best).collect();
    at_best.sort_by_key(|r| r.n);
    let digits = match at_best.as_slice() {
        [.., a, b] => a
            .energies
            .iter()
            .zip(&b.energies)
            .map(|(x, y)| stable_digits(*x, *y))
            .collect(),
        _ => Vec::new(),
    };
    Ok(ScanTable { rows, best, digits })
}
