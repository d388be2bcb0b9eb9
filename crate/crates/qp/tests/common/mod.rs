//! Random strictly convex QPs with box bounds and equalities, and their
//! exact solution by exhaustive enumeration of active sets.

#![allow(dead_code)]

use gridplan_qp::{QpBuilder, QuadraticProgram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-11 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

pub struct Instance {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub aeq: Vec<Vec<f64>>,
    pub beq: Vec<f64>,
}

impl Instance {
    pub fn random(seed: u64, n: usize, m_eq: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut p = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                p[i][j] = (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>();
            }
            p[i][i] += 0.1;
        }
        let q = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..0.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.5..2.0)).collect();
        let x0: Vec<f64> = (0..n).map(|i| rng.gen_range(lower[i]..upper[i])).collect();
        let aeq: Vec<Vec<f64>> = (0..m_eq)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let beq = aeq
            .iter()
            .map(|row| row.iter().zip(&x0).map(|(a, x)| a * x).sum())
            .collect();
        Self {
            p,
            q,
            lower,
            upper,
            aeq,
            beq,
        }
    }

    pub fn to_qp(&self) -> QuadraticProgram {
        let n = self.q.len();
        let mut b = QpBuilder::new(n);
        for i in 0..n {
            for j in i..n {
                b.add_quadratic(i, j, self.p[i][j]);
            }
            b.add_linear(i, self.q[i]);
            b.set_bounds(i, self.lower[i], self.upper[i]);
        }
        for (row, &rhs) in self.aeq.iter().zip(&self.beq) {
            let coeffs: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
            b.add_eq(&coeffs, rhs);
        }
        b.build()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += 0.5 * x[i] * self.p[i][j] * x[j];
            }
            v += self.q[i] * x[i];
        }
        v
    }

    /// Every variable is at its lower bound, upper bound, or free; the best
    /// primal-feasible stationary point over all 3ⁿ patterns is the optimum.
    pub fn enumerate(&self) -> Vec<f64> {
        let n = self.q.len();
        let m = self.beq.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for code in 0..3usize.pow(n as u32) {
            let mut state = vec![0u8; n];
            let mut c = code;
            for s in state.iter_mut() {
                *s = (c % 3) as u8;
                c /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
            let mut x = vec![0.0; n];
            for i in 0..n {
                x[i] = match state[i] {
                    1 => self.lower[i],
                    2 => self.upper[i],
                    _ => 0.0,
                };
            }
            let k = free.len() + m;
            let mut kkt = vec![vec![0.0; k]; k];
            let mut rhs = vec![0.0; k];
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    kkt[a][b] = self.p[i][j];
                }
                rhs[a] = -self.q[i]
                    - (0..n)
                        .filter(|&j| state[j] != 0)
                        .map(|j| self.p[i][j] * x[j])
                        .sum::<f64>();
                for r in 0..m {
                    kkt[a][free.len() + r] = self.aeq[r][i];
                    kkt[free.len() + r][a] = self.aeq[r][i];
                }
            }
            for r in 0..m {
                rhs[free.len() + r] = self.beq[r]
                    - (0..n)
                        .filter(|&j| state[j] != 0)
                        .map(|j| self.aeq[r][j] * x[j])
                        .sum::<f64>();
            }
            let Some(sol) = dense_solve(kkt, rhs) else { continue };
            for (a, &i) in free.iter().enumerate() {
                x[i] = sol[a];
            }
            let feasible = (0..n).all(|i| x[i] >= self.lower[i] - 1e-10 && x[i] <= self.upper[i] + 1e-10)
                && (0..m)
                    .all(|r| (self.aeq[r].iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() - self.beq[r]).abs() < 1e-8);
            if !feasible {
                continue;
            }
            let f = self.objective(&x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
        best.expect("instance is feasible by construction").1
    }
}
