//! Symmetric band matrices with lower-triangle storage and their factorizations.

use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Symmetric band matrix. Row `i` stores columns `i - width ..= i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, width: usize) -> Self {
        let width = width.min(n.saturating_sub(1));
        Self {
            n,
            width,
            data: vec![0.0; n * (width + 1)],
        }
    }

    pub fn from_raw(n: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * (width + 1) {
            return Err(Error::Assembly("band storage has the wrong length".into()));
        }
        Ok(Self { n, width, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    /// Storage split into rows of `width + 1` entries (leading entries of the
    /// first rows fall outside the matrix and stay zero).
    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        let w = self.width + 1;
        self.data.chunks_exact_mut(w)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.width + 1) + self.width + j - i
    }

    /// Entry `(i, j)` of the full symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.width {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Set entry `(i, j)`, `j <= i`, within the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.width);
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Stored lower-band segment of row `i`, columns `first_col(i) ..= i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let lo = self.first_col(i);
        &self.data[self.idx(i, lo)..=self.idx(i, i)]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let lo = self.first_col(i);
        let (a, b) = (self.idx(i, lo), self.idx(i, i));
        &mut self.data[a..=b]
    }

    #[inline]
    pub fn first_col(&self, i: usize) -> usize {
        i.saturating_sub(self.width)
    }

    /// `self + s * other`; both must share the shape.
    pub fn add_scaled(&mut self, other: &BandedMatrix, s: f64) {
        assert_eq!((self.n, self.width), (other.n, other.width));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// `D M D` for the diagonal matrix `D = diag(d)`.
    pub fn scale_symmetric(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.n);
        for i in 0..self.n {
            let lo = self.first_col(i);
            let di = d[i];
            for (k, v) in self.row_mut(i).iter_mut().enumerate() {
                *v *= di * d[lo + k];
            }
        }
    }

    /// Linear combination `sum c_k M_k` of matrices with identical shape.
    pub fn combine(parts: &[(f64, &BandedMatrix)]) -> BandedMatrix {
        let mut out = BandedMatrix::zeros(parts[0].1.n, parts[0].1.width);
        for (c, m) in parts {
            if *c != 0.0 {
                out.add_scaled(m, *c);
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = self.first_col(i);
            let row = self.row(i);
            let (diag, off) = row.split_last().unwrap();
            let mut s = diag * x[i];
            let xi = x[i];
            for (k, a) in off.iter().enumerate() {
                let j = lo + k;
                s += a * x[j];
                y[j] += a * xi;
            }
            y[i] += s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `x^T M y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul(y))
    }

    /// `x^T M x` accumulated in double-double. Energies of an ill-conditioned
    /// pencil cancel by several digits in plain `f64`.
    pub fn quadratic_form_dd(&self, x: &[f64]) -> TwoFloat {
        let mut acc = TwoFloat::from(0.0);
        for i in 0..self.n {
            let lo = self.first_col(i);
            let row = self.row(i);
            let (off, diag) = row.split_at(row.len() - 1);
            let mut s = TwoFloat::from(0.0);
            for (m, xj) in off.iter().zip(&x[lo..i]) {
                s += TwoFloat::new_mul(*m, *xj);
            }
            s = s * 2.0 + TwoFloat::new_mul(diag[0], x[i]);
            acc += s * x[i];
        }
        acc
    }

    /// Actual bandwidth of the nonzero pattern.
    pub fn occupied_width(&self) -> usize {
        let mut w = 0;
        for i in 0..self.n {
            let lo = self.first_col(i);
            if let Some(k) = self.row(i).iter().position(|v| *v != 0.0) {
                w = w.max(i - (lo + k));
            }
        }
        w
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Cholesky factor `L L^T`. Fails if the matrix is not positive definite.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let mut l = self.clone();
        for i in 0..self.n {
            let lo_i = l.first_col(i);
            for j in lo_i..=i {
                let lo = lo_i.max(l.first_col(j));
                let s = {
                    let ri = &l.data[l.idx(i, lo)..l.idx(i, j)];
                    let rj = &l.data[l.idx(j, lo)..l.idx(j, j)];
                    dot(ri, rj)
                };
                let k = l.idx(i, j);
                let v = l.data[k] - s;
                if i == j {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::NotPositiveDefinite(i));
                    }
                    l.data[k] = v.sqrt();
                } else {
                    let d = l.data[l.idx(j, j)];
                    l.data[k] = v / d;
                }
            }
        }
        Ok(BandedCholesky { l })
    }

    /// `L D L^T` without pivoting, for symmetric indefinite shifted matrices.
    pub fn ldlt(&self, shift: f64) -> Result<BandedLdlt> {
        let mut l = self.clone();
        let mut d = vec![0.0; self.n];
        let mut wrow = vec![0.0; self.width + 1];
        // pivots this small relative to the diagonal signal a shift on an eigenvalue
        let scale = (0..self.n)
            .map(|i| self.get(i, i).abs())
            .fold(0.0, f64::max);
        let tiny = scale * 1e-20;
        for i in 0..self.n {
            let lo_i = l.first_col(i);
            for (t, j) in (lo_i..i).enumerate() {
                let lo = lo_i.max(l.first_col(j));
                let off_i = lo - lo_i;
                let s = {
                    let rj = &l.data[l.idx(j, lo)..l.idx(j, j)];
                    dot(&wrow[off_i..t], rj)
                };
                wrow[t] = l.data[l.idx(i, j)] - s;
            }
            let mut di = l.data[l.idx(i, i)];
            for (t, j) in (lo_i..i).enumerate() {
                let lij = wrow[t] / d[j];
                di -= wrow[t] * lij;
                let k = l.idx(i, j);
                l.data[k] = lij;
            }
            if !(di.abs() > tiny) || !di.is_finite() {
                return Err(Error::Breakdown { pivot: i, shift });
            }
            d[i] = di;
            let k = l.idx(i, i);
            l.data[k] = 1.0;
        }
        Ok(BandedLdlt { l, d })
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize the reduction
    let mut s = [0.0f64; 4];
    let n = a.len().min(b.len());
    let (ca, ra) = a[..n].split_at(n - n % 4);
    let (cb, rb) = b[..n].split_at(n - n % 4);
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        s[0] += x[0] * y[0];
        s[1] += x[1] * y[1];
        s[2] += x[2] * y[2];
        s[3] += x[3] * y[3];
    }
    let mut t = (s[0] + s[1]) + (s[2] + s[3]);
    for (x, y) in ra.iter().zip(rb) {
        t += x * y;
    }
    t
}

#[derive(Clone, Debug)]
pub struct BandedCholesky {
    l: BandedMatrix,
}

impl BandedCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let l = &self.l;
        for i in 0..l.n {
            let lo = l.first_col(i);
            let row = l.row(i);
            let s = dot(&row[..i - lo], &b[lo..i]);
            b[i] = (b[i] - s) / row[i - lo];
        }
        for i in (0..l.n).rev() {
            let lo = l.first_col(i);
            let row = l.row(i);
            b[i] /= row[i - lo];
            let bi = b[i];
            for (k, a) in row[..i - lo].iter().enumerate() {
                b[lo + k] -= a * bi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn factor(&self) -> &BandedMatrix {
        &self.l
    }
}

#[derive(Clone, Debug)]
pub struct BandedLdlt {
    l: BandedMatrix,
    d: Vec<f64>,
}

impl BandedLdlt {
    /// Number of negative pivots, which equals the number of negative eigenvalues.
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|v| **v < 0.0).count()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let l = &self.l;
        for i in 0..l.n {
            let lo = l.first_col(i);
            let row = l.row(i);
            b[i] -= dot(&row[..i - lo], &b[lo..i]);
        }
        for (v, d) in b.iter_mut().zip(&self.d) {
            *v /= d;
        }
        for i in (0..l.n).rev() {
            let lo = l.first_col(i);
            let row = l.row(i);
            let bi = b[i];
            for (k, a) in row[..i - lo].iter().enumerate() {
                b[lo + k] -= a * bi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
