//! Ruiz equilibration of the KKT matrix with cost scaling.

use crate::sparse::CscMatrix;

const MIN_SCALING: f64 = 1e-4;
const MAX_SCALING: f64 = 1e4;

fn limit(norm: f64) -> f64 {
    if norm < MIN_SCALING {
        1.0
    } else {
        norm.min(MAX_SCALING)
    }
}

/// Diagonal scaling `P̄ = c D P D`, `Ā = E A D`, `q̄ = c D q`.
#[derive(Debug, Clone)]
pub struct Scaling {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub c: f64,
}

impl Scaling {
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            d: vec![1.0; n],
            e: vec![1.0; m],
            c: 1.0,
        }
    }

    /// Equilibrates `p` (upper triangle), `a` and `q` in place.
    pub fn equilibrate(p: &mut CscMatrix, a: &mut CscMatrix, q: &mut [f64], iterations: usize) -> Self {
        let n = p.ncols;
        let m = a.nrows;
        let mut s = Self::identity(n, m);
        for _ in 0..iterations {
            let p_norm = p.sym_upper_col_inf_norms();
            let a_col = a.col_inf_norms();
            let a_row = a.row_inf_norms();
            let dt: Vec<f64> = (0..n).map(|j| 1.0 / limit(p_norm[j].max(a_col[j])).sqrt()).collect();
            let et: Vec<f64> = a_row.iter().map(|&r| 1.0 / limit(r).sqrt()).collect();
            p.scale(&dt, &dt);
            a.scale(&et, &dt);
            for j in 0..n {
                q[j] *= dt[j];
                s.d[j] *= dt[j];
            }
            for i in 0..m {
                s.e[i] *= et[i];
            }

            let p_norm = p.sym_upper_col_inf_norms();
            let mean = if n > 0 {
                p_norm.iter().sum::<f64>() / n as f64
            } else {
                0.0
            };
            let q_norm = q.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let ct = 1.0 / limit(mean.max(q_norm));
            p.scale_all(ct);
            q.iter_mut().for_each(|v| *v *= ct);
            s.c *= ct;
        }
        s
    }
}
