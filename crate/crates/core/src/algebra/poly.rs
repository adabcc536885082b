//! Exact multivariate Laurent polynomials over the rationals.
//!
//! Used by the operator derivation: every coefficient stays exact until the
//! assembly stage converts stencil-weighted sums to `f64`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Shorthand for the rational `num / den`.
pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    // numerator and denominator may exceed f64 range individually only for
    // pathological inputs; the derivation never produces those
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) => n / d,
        _ => r.to_f64().unwrap_or(f64::NAN),
    }
}

/// Add `coeff` to the entry `key` of a sparse rational map, removing it if it cancels.
pub fn accumulate<K: Ord>(map: &mut BTreeMap<K, Rational>, key: K, coeff: Rational) {
    if coeff.is_zero() {
        return;
    }
    match map.entry(key) {
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(coeff);
        }
        std::collections::btree_map::Entry::Occupied(mut o) => {
            *o.get_mut() += coeff;
            if o.get().is_zero() {
                o.remove();
            }
        }
    }
}

/// A Laurent polynomial in `N` variables with exact rational coefficients.
#[derive(Clone, PartialEq, Eq, Default, Hash, PartialOrd, Ord)]
pub struct Laurent<const N: usize> {
    terms: BTreeMap<[i32; N], Rational>,
}

impl<const N: usize> Laurent<N> {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial([0; N], c)
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn monomial(exps: [i32; N], c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(exps, c);
        p
    }

    /// The single variable `i` (exponent one).
    pub fn var(i: usize) -> Self {
        let mut e = [0; N];
        e[i] = 1;
        Self::monomial(e, Rational::one())
    }

    pub fn add_term(&mut self, exps: [i32; N], c: Rational) {
        accumulate(&mut self.terms, exps, c);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[i32; N], &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: &[i32; N]) -> Rational {
        self.terms.get(exps).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(e, v)| (*e, v * c)).collect(),
        }
    }

    /// Multiply by `c * x^exps`.
    pub fn mul_monomial(&self, exps: &[i32; N], c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|(e, v)| {
                let mut k = *e;
                for i in 0..N {
                    k[i] += exps[i];
                }
                (k, v * c)
            })
            .collect();
        Self { terms }
    }

    pub fn add_assign_ref(&mut self, other: &Self) {
        for (e, c) in &other.terms {
            self.add_term(*e, c.clone());
        }
    }

    pub fn add_scaled(&mut self, other: &Self, c: &Rational) {
        for (e, v) in &other.terms {
            self.add_term(*e, v * c);
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let mut k = *e1;
                for i in 0..N {
                    k[i] += e2[i];
                }
                out.add_term(k, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Partial derivative with respect to variable `i`.
    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            if e[i] != 0 {
                let mut k = *e;
                k[i] -= 1;
                out.add_term(k, c * Rational::from_integer(BigInt::from(e[i])));
            }
        }
        out
    }

    /// Componentwise minimum exponent over all terms (zeros for the empty polynomial).
    pub fn min_exponents(&self) -> [i32; N] {
        let mut m = [i32::MAX; N];
        if self.terms.is_empty() {
            return [0; N];
        }
        for e in self.terms.keys() {
            for i in 0..N {
                m[i] = m[i].min(e[i]);
            }
        }
        m
    }

    /// Componentwise maximum exponent over all terms.
    pub fn max_exponents(&self) -> [i32; N] {
        let mut m = [i32::MIN; N];
        if self.terms.is_empty() {
            return [0; N];
        }
        for e in self.terms.keys() {
            for i in 0..N {
                m[i] = m[i].max(e[i]);
            }
        }
        m
    }

    /// True when no exponent is negative.
    pub fn is_polynomial(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&x| x >= 0))
    }

    pub fn eval(&self, at: &[f64; N]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut v = rat_to_f64(c);
                for i in 0..N {
                    v *= at[i].powi(e[i]);
                }
                v
            })
            .sum()
    }

    /// Substitute every variable by a polynomial in `M` other variables.
    /// Only valid when all exponents are nonnegative.
    pub fn substitute<const M: usize>(&self, images: &[Laurent<M>; N]) -> Option<Laurent<M>> {
        if !self.is_polynomial() {
            return None;
        }
        let max = self.max_exponents();
        let powers: Vec<Vec<Laurent<M>>> = (0..N)
            .map(|i| {
                let mut v = vec![Laurent::<M>::one()];
                for k in 1..=max[i].max(0) as usize {
                    let next = v[k - 1].mul(&images[i]);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Laurent::<M>::zero();
        for (e, c) in &self.terms {
            let mut t = Laurent::<M>::constant(c.clone());
            for i in 0..N {
                if e[i] > 0 {
                    t = t.mul(&powers[i][e[i] as usize]);
                }
            }
            out.add_assign_ref(&t);
        }
        Some(out)
    }

    /// Apply a permutation of variables: variable `i` becomes variable `perm[i]`.
    pub fn permute(&self, perm: [usize; N]) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            let mut k = [0; N];
            for i in 0..N {
                k[perm[i]] = e[i];
            }
            out.add_term(k, c.clone());
        }
        out
    }

    /// Largest absolute coefficient, as a float. Used only for diagnostics.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| rat_to_f64(&c.abs()))
            .fold(0.0, f64::max)
    }
}

impl<const N: usize> std::ops::Add for &Laurent<N> {
    type Output = Laurent<N>;
    fn add(self, rhs: Self) -> Laurent<N> {
        let mut out = self.clone();
        out.add_assign_ref(rhs);
        out
    }
}

impl<const N: usize> std::ops::Sub for &Laurent<N> {
    type Output = Laurent<N>;
    fn sub(self, rhs: Self) -> Laurent<N> {
        let mut out = self.clone();
        out.add_scaled(rhs, &-Rational::one());
        out
    }
}

impl<const N: usize> std::ops::Mul for &Laurent<N> {
    type Output = Laurent<N>;
    fn mul(self, rhs: Self) -> Laurent<N> {
        Laurent::mul(self, rhs)
    }
}

impl<const N: usize> std::ops::Neg for &Laurent<N> {
    type Output = Laurent<N>;
    fn neg(self) -> Laurent<N> {
        self.scale(&-Rational::one())
    }
}

impl<const N: usize> fmt::Debug for Laurent<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<const N: usize> fmt::Display for Laurent<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (i, &x) in e.iter().enumerate() {
                if x != 0 {
                    write!(f, "*v{i}^{x}")?;
                }
            }
        }
        Ok(())
    }
}
