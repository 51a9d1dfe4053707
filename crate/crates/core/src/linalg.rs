//! Symmetric banded matrices and the handful of factorizations the solvers need.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric band matrix stored by lower diagonals: row `i` holds
/// `A[i][i-k]` for `k = 0..=bw`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymBand::zeros(n, 0);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        if k > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + k]
        }
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        assert!(k <= self.bw, "entry ({i},{j}) outside bandwidth {}", self.bw);
        self.data[i * (self.bw + 1) + k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        let w = self.bw + 1;
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for k in 1..=self.bw.min(i) {
                let j = i - k;
                y[i] += row[k] * x[j];
                y[j] += row[k] * x[i];
            }
        }
        y
    }

    /// `alpha * A + beta * I`.
    pub fn scaled_shift(&self, alpha: f64, beta: f64) -> SymBand {
        let mut out = self.clone();
        let w = self.bw + 1;
        for i in 0..self.n {
            for k in 0..w {
                out.data[i * w + k] *= alpha;
            }
            out.data[i * w] += beta;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Largest absolute row sum (the infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let a = (i.saturating_sub(self.bw)..=(i + self.bw).min(self.n - 1))
                .filter(|&j| j != i)
                .map(|j| self.get(i, j).abs())
                .sum::<f64>();
            let d = self.get(i, i);
            lo = lo.min(d - a);
            hi = hi.max(d + a);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `sigma`, by Sylvester's law of
    /// inertia applied to `A - sigma I = L D L^T` (no pivoting). Vanishing
    /// pivots are replaced by `-pivmin`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let pivmin = f64::MIN_POSITIVE.sqrt() * self.norm_inf().max(1.0);
        // l[i*w + k] = L[i][i-k] * D[i-k] for k >= 1, d[i] on the diagonal
        let mut ld = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let mut count = 0;
        for i in 0..n {
            let kmax = bw.min(i);
            // columns j = i-kmax .. i-1
            for k in (1..=kmax).rev() {
                let j = i - k;
                let mut s = self.data[i * w + k];
                // sum over p < j with both (i,p) and (j,p) in band
                let pmin = i.saturating_sub(bw);
                for p in pmin..j {
                    let lip_d = ld[i * w + (i - p)];
                    let ljp = ld[j * w + (j - p)] / d[p];
                    s -= lip_d * ljp;
                }
                ld[i * w + k] = s;
            }
            let mut di = self.data[i * w] - sigma;
            for k in 1..=kmax {
                let p = i - k;
                let v = ld[i * w + k];
                di -= v * v / d[p];
            }
            if di.abs() < pivmin {
                di = -pivmin;
            }
            d[i] = di;
            if di < 0.0 {
                count += 1;
            }
        }
        count
    }
}

/// Banded Cholesky factor `A = L L^T` of a symmetric positive-definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SymBand) -> Result<Self> {
        let n = a.n;
        let bw = a.bw;
        let w = bw + 1;
        let mut l = a.data.clone();
        for i in 0..n {
            let kmax = bw.min(i);
            for k in (1..=kmax).rev() {
                let j = i - k;
                let mut s = l[i * w + k];
                for p in i.saturating_sub(bw)..j {
                    s -= l[i * w + (i - p)] * l[j * w + (j - p)];
                }
                l[i * w + k] = s / l[j * w];
            }
            let mut s = l[i * w];
            for k in 1..=kmax {
                s -= l[i * w + k] * l[i * w + k];
            }
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Numerical(format!(
                    "matrix not positive definite at row {i} (pivot {s:e})"
                )));
            }
            l[i * w] = s.sqrt();
        }
        Ok(BandCholesky { n, bw, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let w = self.bw + 1;
        let mut y = b.to_vec();
        for i in 0..self.n {
            let mut s = y[i];
            for k in 1..=self.bw.min(i) {
                s -= self.l[i * w + k] * y[i - k];
            }
            y[i] = s / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in 1..=self.bw.min(self.n - 1 - i) {
                s -= self.l[(i + k) * w + k] * y[i + k];
            }
            y[i] = s / self.l[i * w];
        }
        y
    }
}

/// LU factorization with partial pivoting of `A - sigma I` for a symmetric band `A`.
/// Used for inverse iteration, where the shifted matrix is nearly singular.
#[derive(Debug, Clone)]
pub struct ShiftedBandLu {
    n: usize,
    bw: usize,
    /// row r stores columns r-bw ..= r+2bw
    rows: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl ShiftedBandLu {
    fn width(bw: usize) -> usize {
        3 * bw + 1
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        // column c relative to window start r - bw
        r * Self::width(self.bw) + (c + self.bw - r)
    }

    pub fn factor(a: &SymBand, sigma: f64) -> Self {
        let n = a.n;
        let bw = a.bw;
        let w = Self::width(bw);
        let mut lu = ShiftedBandLu {
            n,
            bw,
            rows: vec![0.0; n * w],
            mult: vec![0.0; n * bw.max(1)],
            piv: vec![0; n],
        };
        for r in 0..n {
            let lo = r.saturating_sub(bw);
            let hi = (r + bw).min(n - 1);
            for c in lo..=hi {
                let v = a.get(r, c) - if r == c { sigma } else { 0.0 };
                let id = lu.idx(r, c);
                lu.rows[id] = v;
            }
        }
        let tiny = f64::EPSILON * a.norm_inf().max(sigma.abs()).max(f64::MIN_POSITIVE);
        for i in 0..n {
            let last = (i + bw).min(n - 1);
            let mut p = i;
            let mut best = lu.rows[lu.idx(i, i)].abs();
            for r in i + 1..=last {
                let v = lu.rows[lu.idx(r, i)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            lu.piv[i] = p;
            let cmax = (i + 2 * bw).min(n - 1);
            if p != i {
                for c in i..=cmax {
                    let (a_id, b_id) = (lu.idx(i, c), lu.idx(p, c));
                    lu.rows.swap(a_id, b_id);
                }
            }
            let pid = lu.idx(i, i);
            if lu.rows[pid].abs() < tiny {
                lu.rows[pid] = if lu.rows[pid] < 0.0 { -tiny } else { tiny };
            }
            let pivot = lu.rows[pid];
            for r in i + 1..=last {
                let rid = lu.idx(r, i);
                let f = lu.rows[rid] / pivot;
                lu.rows[rid] = 0.0;
                lu.mult[i * bw.max(1) + (r - i - 1)] = f;
                if f != 0.0 {
                    for c in i + 1..=cmax {
                        let src = lu.rows[lu.idx(i, c)];
                        let dst = lu.idx(r, c);
                        lu.rows[dst] -= f * src;
                    }
                }
            }
        }
        lu
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let bw = self.bw;
        let mut x = b.to_vec();
        for i in 0..n {
            let p = self.piv[i];
            x.swap(i, p);
            let last = (i + bw).min(n - 1);
            for r in i + 1..=last {
                x[r] -= self.mult[i * bw.max(1) + (r - i - 1)] * x[i];
            }
        }
        for i in (0..n).rev() {
            let cmax = (i + 2 * bw).min(n - 1);
            let mut s = x[i];
            for c in i + 1..=cmax {
                s -= self.rows[self.idx(i, c)] * x[c];
            }
            x[i] = s / self.rows[self.idx(i, i)];
        }
        x
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
