//! Envelope (skyline) LDLᵀ factorization for symmetric quasi-definite systems.
//!
//! Quasi-definite matrices `[H Aᵀ; A −G]` with `H, G` positive definite admit a
//! stable LDLᵀ factorization under any symmetric permutation, so no pivoting
//! is performed. Pivots whose sign disagrees with the expected inertia are
//! replaced by a small regularization of the correct sign.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LdlError {
    #[error("matrix dimension {n} does not match permutation length {perm}")]
    Dimension { n: usize, perm: usize },
    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),
}

/// Factorization `P K Pᵀ = L D Lᵀ` stored row-wise within the lower envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeLdl {
    n: usize,
    perm: Vec<usize>,
    /// First stored column of each permuted row.
    first: Vec<usize>,
    /// Offset of each row's strictly-lower part in `lower`.
    start: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    regularized: usize,
}

impl EnvelopeLdl {
    /// Factors the symmetric matrix given by `entries`. Each off-diagonal pair
    /// must appear in only one triangle; repeated entries are summed.
    ///
    /// `signs`, when provided, gives the expected sign of each pivot (by
    /// original index); wrong-signed or tiny pivots are replaced by
    /// `sign * regularization`.
    pub fn factor(
        n: usize,
        entries: &[(usize, usize, f64)],
        perm: &[usize],
        signs: Option<&[f64]>,
        regularization: f64,
    ) -> Result<Self, LdlError> {
        Self::factor_dynamic(n, entries, perm, signs, regularization, regularization)
    }

    /// Like [`EnvelopeLdl::factor`], but a pivot is replaced by
    /// `sign * replacement` only when `d * sign < threshold`.
    pub fn factor_dynamic(
        n: usize,
        entries: &[(usize, usize, f64)],
        perm: &[usize],
        signs: Option<&[f64]>,
        threshold: f64,
        replacement: f64,
    ) -> Result<Self, LdlError> {
        if perm.len() != n {
            return Err(LdlError::Dimension { n, perm: perm.len() });
        }
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        let mut diag = vec![0.0; n];
        for &(i, j, _) in entries {
            let (a, b) = (inverse[i], inverse[j]);
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            first[r] = first[r].min(c);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            start.push(total);
            total += i - f;
        }
        start.push(total);
        let mut lower = vec![0.0; total];
        for &(i, j, v) in entries {
            let (a, b) = (inverse[i], inverse[j]);
            if a == b {
                diag[a] += v;
            } else {
                let (r, c) = if a > b { (a, b) } else { (b, a) };
                lower[start[r] + c - first[r]] += v;
            }
        }

        let mut factor = Self {
            n,
            perm: perm.to_vec(),
            first,
            start,
            lower,
            diag,
            regularized: 0,
        };
        let permuted_signs: Option<Vec<f64>> = signs.map(|s| factor.perm.iter().map(|&old| s[old]).collect());
        factor.numeric(permuted_signs.as_deref(), threshold, replacement)?;
        Ok(factor)
    }

    fn numeric(&mut self, signs: Option<&[f64]>, threshold: f64, replacement: f64) -> Result<(), LdlError> {
        let mut scaled = vec![0.0; self.n];
        for i in 0..self.n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let lo = fi.max(fj);
                let mut t = self.lower[si + j - fi];
                for k in lo..j {
                    t -= scaled[k] * self.lower[sj + k - fj];
                }
                scaled[j] = t;
            }
            let mut d = self.diag[i];
            for j in fi..i {
                let l = scaled[j] / self.diag[j];
                self.lower[si + j - fi] = l;
                d -= scaled[j] * l;
            }
            match signs {
                Some(s) if !(d * s[i] >= threshold) => {
                    d = s[i] * replacement;
                    self.regularized += 1;
                }
                None if d == 0.0 || !d.is_finite() => return Err(LdlError::ZeroPivot(self.perm[i])),
                _ => {}
            }
            self.diag[i] = d;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of pivots replaced by regularization.
    pub fn regularized_pivots(&self) -> usize {
        self.regularized
    }

    /// Number of stored strictly-lower entries.
    pub fn envelope_len(&self) -> usize {
        self.lower.len()
    }

    /// Pivots `D` in permuted order.
    pub fn pivots(&self) -> &[f64] {
        &self.diag
    }

    /// Solves `K x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let mut s = y[i];
            for (k, l) in row.iter().enumerate() {
                s -= l * y[fi + k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}
