//! Banded LU with partial pivoting for KKT systems whose unknowns have been
//! ordered node by node along the time grid.

use crate::error::{contract, Result};

pub(crate) struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    /// Row `i` stores columns `i − lower ..= i + upper + lower`.
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub(crate) fn new(n: usize, lower: usize, upper: usize) -> Self {
        let width = 2 * lower + upper + 1;
        Self {
            n,
            lower,
            upper,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub(crate) fn from_entries(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let lower = entries.iter().map(|&(i, j, _)| i.saturating_sub(j)).max().unwrap_or(0);
        let upper = entries.iter().map(|&(i, j, _)| j.saturating_sub(i)).max().unwrap_or(0);
        let mut m = Self::new(n, lower, upper);
        for &(i, j, v) in entries {
            *m.at_mut(i, j) += v;
        }
        m
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper + self.lower);
        i * self.width + (j + self.lower - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.slot(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let s = self.slot(i, j);
        &mut self.data[s]
    }

    /// In-place LU factorization with partial pivoting inside the band.
    pub(crate) fn factorize(mut self) -> Result<BandedLu> {
        let n = self.n;
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        let mut pivots = vec![0; n];
        for c in 0..n {
            let last_row = (c + self.lower).min(n - 1);
            let (mut piv, mut best) = (c, self.at(c, c).abs());
            for r in c + 1..=last_row {
                let v = self.at(r, c).abs();
                if v > best {
                    piv = r;
                    best = v;
                }
            }
            if best <= 1e-300 * scale || !best.is_finite() {
                return Err(contract(format!("KKT matrix is singular at column {c}")));
            }
            pivots[c] = piv;
            let last_col = (c + self.upper + self.lower).min(n - 1);
            if piv != c {
                for j in c..=last_col {
                    let (a, b) = (self.slot(c, j), self.slot(piv, j));
                    self.data.swap(a, b);
                }
            }
            let d = self.at(c, c);
            for r in c + 1..=last_row {
                let f = self.at(r, c) / d;
                // the eliminated slot keeps the multiplier
                *self.at_mut(r, c) = f;
                if f == 0.0 {
                    continue;
                }
                for j in c + 1..=last_col {
                    let v = self.at(c, j);
                    if v != 0.0 {
                        *self.at_mut(r, j) -= f * v;
                    }
                }
            }
        }
        Ok(BandedLu { m: self, pivots })
    }

    #[cfg(test)]
    pub(crate) fn solve(self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.factorize()?.solve(rhs))
    }
}

pub(crate) struct BandedLu {
    m: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let mut b = rhs.to_vec();
        for c in 0..n {
            b.swap(c, self.pivots[c]);
            let last_row = (c + m.lower).min(n - 1);
            for r in c + 1..=last_row {
                b[r] -= m.at(r, c) * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let last_col = (i + m.upper + m.lower).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=last_col {
                s -= m.at(i, j) * x[j];
            }
            x[i] = s / m.at(i, i);
        }
        x
    }
}
