//! Banded storage and a banded LU factorization with partial pivoting.
//!
//! The polar five-point stencil with one-sided second-order boundary rows has
//! lower and upper bandwidth `2 * n_theta` in radius-major ordering. The
//! matrix is not symmetric and the boundary rows are not diagonally dominant,
//! so the factorization pivots by rows (same scheme as LAPACK `gbtrf`: pivots
//! are applied to the trailing columns only, multipliers stay where they were
//! computed, and the solve interleaves swaps with elimination).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Square band matrix, row-major: row `i` stores columns `i - kl ..= i + ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, i: usize, c: usize) -> Option<usize> {
        if c + self.kl < i || c > i + self.ku || c >= self.n {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + c + self.kl - i)
        }
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.slot(i, c).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to entry `(i, c)`. Panics if the entry is outside the band.
    pub fn add(&mut self, i: usize, c: usize, v: f64) {
        let k = self
            .slot(i, c)
            .unwrap_or_else(|| panic!("entry ({i}, {c}) outside band"));
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, c: usize, v: f64) {
        let k = self
            .slot(i, c)
            .unwrap_or_else(|| panic!("entry ({i}, {c}) outside band"));
        self.data[k] = v;
    }

    /// Nonzero-capable entries `(column, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        (lo..=hi).map(move |c| (c, self.data[self.slot(i, c).unwrap()]))
    }

    /// Dot product of row `i` with `x`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(c, v)| v * x[c]).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row_dot(i, x)).collect()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Raw band storage of row `i` (columns `i - kl ..= i + ku`).
    pub(crate) fn row_slice_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.kl + self.ku + 1;
        &mut self.data[i * w..(i + 1) * w]
    }
}

/// LU factors of a [`BandMatrix`] with row pivoting.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &BandMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        // slot i holds columns i - kl ..= i + kl + ku (room for pivot fill-in)
        let width = 2 * kl + ku + 1;
        let mut data = vec![0.0; n * width];
        for i in 0..n {
            for (c, v) in a.row(i) {
                data[i * width + c + kl - i] = v;
            }
        }
        let at = |i: usize, c: usize| i * width + c + kl - i;
        let mut piv = vec![0usize; n];

        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = data[at(k, k)].abs();
            for i in k + 1..=last {
                let v = data[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularMatrix { row: k });
            }
            piv[k] = p;
            let umax = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=umax {
                    data.swap(at(k, c), at(p, c));
                }
            }
            let pivot = data[at(k, k)];
            let (head, tail) = data.split_at_mut((k + 1) * width);
            let row_k = &head[k * width + kl + 1..k * width + kl + 1 + (umax - k)];
            for i in k + 1..=last {
                let base = (i - k - 1) * width;
                let off = base + k + kl - i;
                let m = tail[off] / pivot;
                tail[off] = m;
                if m != 0.0 {
                    let row_i = &mut tail[off + 1..off + 1 + (umax - k)];
                    for (x, &y) in row_i.iter_mut().zip(row_k) {
                        *x -= m * y;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            width,
            data,
            piv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        debug_assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let last = (k + kl).min(n - 1);
                for i in k + 1..=last {
                    b[i] -= self.data[i * w + k + kl - i] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let umax = (k + kl + ku).min(n - 1);
            let row = &self.data[k * w + kl..k * w + kl + 1 + (umax - k)];
            let s: f64 = row[1..]
                .iter()
                .zip(&b[k + 1..=umax])
                .map(|(a, x)| a * x)
                .sum();
            b[k] = (b[k] - s) / row[0];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// `‖A x - b‖_∞ / (‖A‖_∞ ‖x‖_∞ + ‖b‖_∞)`, the scale-free residual used by
/// every solve in the crate.
pub fn relative_residual(a: &BandMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = (0..a.n())
        .map(|i| (a.row_dot(i, x) - b[i]).abs())
        .fold(0.0, f64::max);
    let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bn = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = a.norm_inf() * xn + bn;
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}
