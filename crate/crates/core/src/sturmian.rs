//! Truncated three-dimensional Sturmian basis and exact one-dimensional matrix
//! elements.
//!
//! The one-dimensional functions are `phi_n(t) = (-1)^n L_n(t) exp(-t/2)`,
//! orthonormal on `[0, inf)`. With a scale `a` the basis is
//! `sqrt(a) phi_n(a u)`, so that an element with `p` net powers of length picks
//! up the factor `a^(-p)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::algebra::YzSymmetry;
use crate::error::{Error, Result};

/// Largest power of the coordinate for which stencils are tabulated.
pub const MAX_DEGREE: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SturmianIndex {
    pub nx: u32,
    pub ny: u32,
    pub nz: u32,
}

impl SturmianIndex {
    pub fn new(nx: u32, ny: u32, nz: u32) -> Self {
        Self { nx, ny, nz }
    }

    pub fn axis(&self, a: usize) -> u32 {
        match a {
            0 => self.nx,
            1 => self.ny,
            _ => self.nz,
        }
    }

    /// Image under the exchange `y <-> z`.
    pub fn swapped(&self) -> Self {
        Self::new(self.nx, self.nz, self.ny)
    }

    pub fn total(&self) -> u32 {
        self.nx + self.ny + self.nz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisTruncation {
    pub n: u32,
    pub n_x: u32,
    pub yz: YzSymmetry,
}

impl BasisTruncation {
    pub fn new(n: u32, n_x: u32, yz: YzSymmetry) -> Result<Self> {
        if n_x > n {
            return Err(Error::InvalidTruncation {
                n: n as usize,
                nx: n_x as usize,
            });
        }
        Ok(Self { n, n_x, yz })
    }

    pub fn contains(&self, q: &SturmianIndex) -> bool {
        q.total() <= self.n
            && q.nx <= self.n_x
            && match self.yz {
                YzSymmetry::None => true,
                YzSymmetry::Symmetric => q.ny <= q.nz,
                YzSymmetry::Antisymmetric => q.ny < q.nz,
            }
    }

    /// Closed-form count of the states.
    pub fn size(&self) -> usize {
        (0..=self.n_x)
            .map(|nx| {
                let m = (self.n - nx) as usize;
                let all = (m + 1) * (m + 2) / 2;
                let diagonal = m / 2 + 1;
                match self.yz {
                    YzSymmetry::None => all,
                    YzSymmetry::Symmetric => (all + diagonal) / 2,
                    YzSymmetry::Antisymmetric => (all - diagonal) / 2,
                }
            })
            .sum()
    }
}

/// All states of the truncation in lexicographic `(n_x, n_y, n_z)` order.
pub fn enumerate_basis(trunc: &BasisTruncation) -> Result<Vec<SturmianIndex>> {
    if trunc.n_x > trunc.n {
        return Err(Error::InvalidTruncation {
            n: trunc.n as usize,
            nx: trunc.n_x as usize,
        });
    }
    let mut out = Vec::with_capacity(trunc.size());
    for nx in 0..=trunc.n_x {
        for ny in 0..=(trunc.n - nx) {
            for nz in 0..=(trunc.n - nx - ny) {
                let q = SturmianIndex::new(nx, ny, nz);
                if trunc.contains(&q) {
                    out.push(q);
                }
            }
        }
    }
    Ok(out)
}

/// Expansion of a sector state on product states, as `(weight, product index)`.
pub fn symmetrize(q: SturmianIndex, yz: YzSymmetry) -> Result<Vec<(f64, SturmianIndex)>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match yz {
        YzSymmetry::None => Ok(vec![(1.0, q)]),
        YzSymmetry::Symmetric if q.ny == q.nz => Ok(vec![(1.0, q)]),
        YzSymmetry::Symmetric => Ok(vec![(h, q), (h, q.swapped())]),
        YzSymmetry::Antisymmetric if q.ny == q.nz => Err(Error::InvalidState(
            q.nx as usize,
            q.ny as usize,
            q.nz as usize,
        )),
        YzSymmetry::Antisymmetric => Ok(vec![(h, q), (-h, q.swapped())]),
    }
}

/// Inverse length scales: `alpha` along `x`, `beta` along `y` and `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    pub alpha: f64,
    pub beta: f64,
}

impl ScaleParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "scales must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn axis(&self, a: usize) -> f64 {
        if a == 0 {
            self.alpha
        } else {
            self.beta
        }
    }
}

/// Canonical operator factors of one coordinate `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StencilKind {
    /// `<n'| u^k |n>`
    Mult,
    /// `<n'| u^k d/du |n>`
    Deriv,
    /// `<d/du n'| u^k |d/du n>`
    DerivDeriv,
}

impl StencilKind {
    /// Net power of length carried by the operator.
    fn length_power(self, k: u32) -> i32 {
        match self {
            StencilKind::Mult => k as i32,
            StencilKind::Deriv => k as i32 - 1,
            StencilKind::DerivDeriv => k as i32 - 2,
        }
    }
}

/// Exact banded matrix over `BigInt` with a common denominator.
#[derive(Clone, Debug)]
struct IntBand {
    n: usize,
    h: usize,
    data: Vec<BigInt>,
}

impl IntBand {
    fn zeros(n: usize, h: usize) -> Self {
        Self {
            n,
            h,
            data: vec![BigInt::zero(); n * (2 * h + 1)],
        }
    }

    fn get(&self, m: usize, n: usize) -> BigInt {
        if m.abs_diff(n) > self.h || m >= self.n || n >= self.n {
            return BigInt::zero();
        }
        self.data[m * (2 * self.h + 1) + n + self.h - m].clone()
    }

    fn set(&mut self, m: usize, n: usize, v: BigInt) {
        let h = self.h;
        self.data[m * (2 * h + 1) + n + h - m] = v;
    }

    fn identity(n: usize) -> Self {
        let mut b = Self::zeros(n, 0);
        for i in 0..n {
            b.set(i, i, BigInt::one());
        }
        b
    }

    fn mul(&self, o: &IntBand) -> IntBand {
        let h = self.h + o.h;
        let mut out = IntBand::zeros(self.n, h);
        for m in 0..self.n {
            for n in m.saturating_sub(h)..(m + h + 1).min(self.n) {
                let lo = m.saturating_sub(self.h).max(n.saturating_sub(o.h));
                let hi = (m + self.h).min(n + o.h).min(self.n - 1);
                let mut s = BigInt::zero();
                for l in lo..=hi {
                    s += self.get(m, l) * o.get(l, n);
                }
                out.set(m, n, s);
            }
        }
        out
    }

    fn transpose(&self) -> IntBand {
        let mut out = IntBand::zeros(self.n, self.h);
        for m in 0..self.n {
            for n in m.saturating_sub(self.h)..(m + self.h + 1).min(self.n) {
                out.set(n, m, self.get(m, n));
            }
        }
        out
    }
}

/// `t` in the unscaled basis: tridiagonal with `2n+1` and `n+1`.
fn x_matrix(n: usize) -> IntBand {
    let mut x = IntBand::zeros(n, 1);
    for i in 0..n {
        x.set(i, i, BigInt::from(2 * i + 1));
        if i + 1 < n {
            x.set(i, i + 1, BigInt::from(i + 1));
            x.set(i + 1, i, BigInt::from(i + 1));
        }
    }
    x
}

/// Twice `t d/dt` in the unscaled basis.
fn y2_matrix(n: usize) -> IntBand {
    let mut y = IntBand::zeros(n, 1);
    for i in 0..n {
        y.set(i, i, BigInt::from(-1));
        if i >= 1 {
            y.set(i - 1, i, BigInt::from(i));
        }
        if i + 1 < n {
            y.set(i + 1, i, -BigInt::from(i + 1));
        }
    }
    y
}

/// Exact unscaled stencil entries `<m|op|n>` for `m, n < size`.
#[derive(Clone, Debug)]
pub struct ExactStencil {
    pub kind: StencilKind,
    pub k: u32,
    band: IntBand,
    denom: BigInt,
}

impl ExactStencil {
    pub fn get(&self, m: usize, n: usize) -> BigRational {
        BigRational::new(self.band.get(m, n), self.denom.clone())
    }

    pub fn half_bandwidth(&self) -> usize {
        self.k as usize
    }
}

/// Exact stencils for every `k` up to `kmax` and indices below `size`.
pub fn exact_stencils(kind: StencilKind, kmax: u32, size: usize) -> Result<Vec<ExactStencil>> {
    // pad so truncated products stay exact on the requested block
    let pad = kmax as usize + 2;
    let n = size + pad;
    let x = x_matrix(n);
    let y2 = y2_matrix(n);
    let mut out = Vec::new();
    let mut xpow = IntBand::identity(n);
    let mut powers = vec![xpow.clone()];
    for _ in 0..kmax {
        xpow = xpow.mul(&x);
        powers.push(xpow.clone());
    }
    for k in 0..=kmax {
        let (band, denom) = match kind {
            StencilKind::Mult => (powers[k as usize].clone(), BigInt::one()),
            StencilKind::Deriv => {
                if k == 0 {
                    continue;
                }
                (powers[k as usize - 1].mul(&y2), BigInt::from(2))
            }
            StencilKind::DerivDeriv => match k {
                0 => continue,
                1 => {
                    // <phi'_m| t |phi'_n> = (n + 1/2) delta - t/4
                    let mut b = IntBand::zeros(n, 1);
                    for i in 0..n {
                        for j in i.saturating_sub(1)..(i + 2).min(n) {
                            let mut v = -x.get(i, j);
                            if i == j {
                                v += BigInt::from(4 * i + 2);
                            }
                            b.set(i, j, v);
                        }
                    }
                    (b, BigInt::from(4))
                }
                _ => (
                    y2.transpose().mul(&powers[k as usize - 2]).mul(&y2),
                    BigInt::from(4),
                ),
            },
        };
        out.push(ExactStencil {
            kind,
            k,
            band: IntBand {
                n: size,
                h: band.h,
                data: (0..size)
                    .flat_map(|m| (0..2 * band.h + 1).map(move |d| (m, d)))
                    .map(|(m, d)| {
                        let c = (m + d) as isize - band.h as isize;
                        if c < 0 {
                            BigInt::zero()
                        } else {
                            band.get(m, c as usize)
                        }
                    })
                    .collect(),
            },
            denom,
        });
    }
    Ok(out)
}

/// Floating-point stencil for one operator factor at a given scale.
#[derive(Clone, Debug)]
pub struct Stencil1D {
    pub kind: StencilKind,
    pub k: u32,
    pub half_bandwidth: usize,
    pub scale: f64,
    size: usize,
    values: Vec<f64>,
}

impl Stencil1D {
    /// `<m|op|n>`, zero outside the band or the tabulated range.
    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        let h = self.half_bandwidth;
        if m >= self.size || n >= self.size || m.abs_diff(n) > h {
            return 0.0;
        }
        self.values[m * (2 * h + 1) + n + h - m]
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// Stencil of `op_tag` with power `k`, scaled for the given inverse length.
pub fn stencil(kind: StencilKind, k: u32, scale: f64, size: usize) -> Result<Stencil1D> {
    if kind != StencilKind::Mult && k == 0 {
        return Err(Error::NonBanded(format!("{kind:?} with k = 0")));
    }
    if k > MAX_DEGREE {
        return Err(Error::Assembly(format!(
            "stencil degree {k} exceeds {MAX_DEGREE}"
        )));
    }
    let exact = exact_stencils(kind, k, size)?
        .into_iter()
        .find(|s| s.k == k)
        .expect("requested degree is tabulated");
    Ok(to_float(&exact, scale, size))
}

fn to_float(exact: &ExactStencil, scale: f64, size: usize) -> Stencil1D {
    let h = exact.half_bandwidth();
    let factor = scale.powi(-exact.kind.length_power(exact.k));
    let denom = exact.denom.to_f64().unwrap();
    let mut values = vec![0.0; size * (2 * h + 1)];
    for m in 0..size {
        for n in m.saturating_sub(h)..(m + h + 1).min(size) {
            // numerators stay far below 2^1023 for the supported sizes
            let v = exact.band.get(m, n).to_f64().unwrap() / denom;
            values[m * (2 * h + 1) + n + h - m] = v * factor;
        }
    }
    Stencil1D {
        kind: exact.kind,
        k: exact.k,
        half_bandwidth: h,
        scale,
        size,
        values,
    }
}

/// All stencils needed along one axis.
#[derive(Clone, Debug)]
pub struct AxisStencils {
    pub scale: f64,
    mult: Vec<Stencil1D>,
    deriv: Vec<Option<Stencil1D>>,
    deriv_deriv: Vec<Option<Stencil1D>>,
}

impl AxisStencils {
    pub fn new(scale: f64, kmax: u32, size: usize) -> Result<Self> {
        if kmax > MAX_DEGREE {
            return Err(Error::Assembly(format!(
                "stencil degree {kmax} exceeds {MAX_DEGREE}"
            )));
        }
        let build = |kind| -> Result<Vec<Option<Stencil1D>>> {
            let ex = exact_stencils(kind, kmax.max(1), size)?;
            let mut v = vec![None; kmax as usize + 1];
            for e in ex.iter().filter(|e| e.k <= kmax) {
                v[e.k as usize] = Some(to_float(e, scale, size));
            }
            Ok(v)
        };
        Ok(Self {
            scale,
            mult: build(StencilKind::Mult)?
                .into_iter()
                .map(|s| s.unwrap())
                .collect(),
            deriv: build(StencilKind::Deriv)?,
            deriv_deriv: build(StencilKind::DerivDeriv)?,
        })
    }

    /// Factor with optional derivatives on the left and right function.
    pub fn factor(&self, left: bool, right: bool, k: u32) -> Result<&Stencil1D> {
        let s = match (left, right) {
            (false, false) => Some(&self.mult[k as usize]),
            (true, true) => self.deriv_deriv[k as usize].as_ref(),
            _ => self.deriv[k as usize].as_ref(),
        };
        s.ok_or_else(|| Error::NonBanded(format!("derivative factor with power {k}")))
    }
}

/// Evaluate `<m|op|n>` for a factor that may carry the derivative on the left.
#[inline]
pub fn factor_value(s: &Stencil1D, left_only: bool, m: usize, n: usize) -> f64 {
    if left_only {
        s.get(n, m)
    } else {
        s.get(m, n)
    }
}
