//! Primal-dual interior-point QP solver (Mehrotra predictor-corrector).
//!
//! Works on the same [`QuadraticProgram`] and returns the same
//! [`SolveReport`] as the operator-splitting solver. Variable bounds are
//! eliminated into the diagonal of the Newton system; equalities and general
//! inequalities stay in a quasi-definite augmented system factored by the
//! envelope LDLᵀ. Infeasibility is not certified here: a run that stalls
//! ends with [`Status::MaxIterations`].

use crate::ldl::EnvelopeLdl;
use crate::ordering::envelope_ordering;
use crate::osqp::{SolveReport, SolverError, Status};
use crate::problem::QuadraticProgram;
use crate::scaling::Scaling;
use crate::sparse::{dot, CscMatrix};

/// Floor on slacks and multipliers, keeping `s/λ` representable.
const MIN_CONE: f64 = 1e-20;

/// `(row, column, value)`
type Triplet = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct IpmSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub scaling_iters: usize,
    /// Static primal and dual regularization of the augmented system.
    pub regularization: f64,
    /// Pivots below this magnitude (or of the wrong sign) are replaced by
    /// `dynamic_replacement`; iterative refinement absorbs the change.
    pub dynamic_threshold: f64,
    pub dynamic_replacement: f64,
    pub refine_iter: usize,
    /// Fraction of the distance to the boundary taken per step.
    pub step_fraction: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            max_iter: 100,
            scaling_iters: 10,
            regularization: 1e-8,
            dynamic_threshold: 1e-13,
            dynamic_replacement: 2e-7,
            refine_iter: 3,
            step_fraction: 0.99,
        }
    }
}

/// Where a cone row of the original problem came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cone {
    /// Row `i` of the general inequalities.
    General(usize),
    /// `x_j ≤ u_j`
    Upper(usize),
    /// `−x_j ≤ −l_j`
    Lower(usize),
}

/// Reusable interior-point state: scaling, ordering and problem data.
pub struct IpmSolver {
    settings: IpmSettings,
    n: usize,
    constant: f64,
    scaling: Scaling,
    p: CscMatrix,
    q: Vec<f64>,
    /// Equalities, with fixed variables appended as unit rows.
    e: CscMatrix,
    b: Vec<f64>,
    n_eq: usize,
    fixed: Vec<usize>,
    g: CscMatrix,
    cones: Vec<Cone>,
    /// Right-hand side of every cone row, scaled.
    h: Vec<f64>,
    perm: Vec<usize>,
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    lam: Vec<f64>,
}

struct Residual {
    dual: Vec<f64>,
    eq: Vec<f64>,
    cone: Vec<f64>,
    dual_norm: f64,
    prim_norm: f64,
    eps_dual: f64,
    eps_prim: f64,
}

impl IpmSolver {
    pub fn new(qp: &QuadraticProgram, settings: IpmSettings) -> Result<Self, SolverError> {
        qp.validate()?;
        let n = qp.num_vars();
        let n_eq = qp.num_eq();
        let fixed: Vec<usize> = (0..n).filter(|&j| qp.lower[j] == qp.upper[j]).collect();
        let fixed_rows: Vec<Triplet> = fixed.iter().enumerate().map(|(r, &j)| (r, j, 1.0)).collect();
        let e = qp
            .eq_matrix
            .vstack(&CscMatrix::from_triplets(fixed.len(), n, &fixed_rows));
        let mut b = qp.eq_rhs.clone();
        b.extend(fixed.iter().map(|&j| qp.lower[j]));
        let me = e.nrows;
        let mg = qp.num_ineq();

        // Equilibrate [P Aᵀ; A 0] with A = [E; G].
        let mut p = qp.quadratic.clone();
        let mut a = e.vstack(&qp.ineq_matrix);
        let mut q = qp.linear.clone();
        let scaling = if settings.scaling_iters > 0 {
            Scaling::equilibrate(&mut p, &mut a, &mut q, settings.scaling_iters)
        } else {
            Scaling::identity(n, me + mg)
        };
        let e_rows: Vec<usize> = (0..me).collect();
        let g_rows: Vec<usize> = (me..me + mg).collect();
        let e_scaled = a.select_rows(&e_rows);
        let g_scaled = a.select_rows(&g_rows);
        for (i, v) in b.iter_mut().enumerate() {
            *v *= scaling.e[i];
        }

        let mut cones = Vec::new();
        let mut h = Vec::new();
        for i in 0..mg {
            cones.push(Cone::General(i));
            h.push(qp.ineq_rhs[i] * scaling.e[me + i]);
        }
        for j in 0..n {
            if qp.lower[j] == qp.upper[j] {
                continue;
            }
            if qp.upper[j].is_finite() {
                cones.push(Cone::Upper(j));
                h.push(qp.upper[j] / scaling.d[j]);
            }
            if qp.lower[j].is_finite() {
                cones.push(Cone::Lower(j));
                h.push(-qp.lower[j] / scaling.d[j]);
            }
        }

        let dim = n + me + mg;
        let mut adjacency = vec![Vec::new(); dim];
        for (r, c, _) in p.triplets() {
            if r != c {
                adjacency[r].push(c);
                adjacency[c].push(r);
            }
        }
        for (r, c, _) in e_scaled.triplets() {
            adjacency[n + r].push(c);
            adjacency[c].push(n + r);
        }
        for (r, c, _) in g_scaled.triplets() {
            adjacency[n + me + r].push(c);
            adjacency[c].push(n + me + r);
        }
        let perm = envelope_ordering(&adjacency);
        Ok(Self {
            settings,
            n,
            constant: qp.constant,
            scaling,
            p,
            q,
            e: e_scaled,
            b,
            n_eq,
            fixed,
            g: g_scaled,
            cones,
            h,
            perm,
        })
    }

    pub fn settings(&self) -> &IpmSettings {
        &self.settings
    }

    /// Replaces the linear objective term, keeping the scaling.
    pub fn update_linear(&mut self, linear: &[f64]) {
        assert_eq!(linear.len(), self.n);
        for j in 0..self.n {
            self.q[j] = self.scaling.c * self.scaling.d[j] * linear[j];
        }
    }

    /// `G_full x`, cone by cone.
    fn cone_mul(&self, x: &[f64], gx: &mut Vec<f64>) {
        let mut general = vec![0.0; self.g.nrows];
        self.g.mul_vec(x, &mut general);
        gx.clear();
        gx.extend(self.cones.iter().map(|c| match *c {
            Cone::General(i) => general[i],
            Cone::Upper(j) => x[j],
            Cone::Lower(j) => -x[j],
        }));
    }

    /// `G_fullᵀ λ`
    fn cone_mul_t(&self, lam: &[f64], out: &mut [f64]) {
        let mg = self.g.nrows;
        let mut general = vec![0.0; mg];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, c) in self.cones.iter().enumerate() {
            match *c {
                Cone::General(i) => general[i] = lam[k],
                Cone::Upper(j) => out[j] += lam[k],
                Cone::Lower(j) => out[j] -= lam[k],
            }
        }
        let mut gt = vec![0.0; self.n];
        self.g.mul_t_vec(&general, &mut gt);
        for j in 0..self.n {
            out[j] += gt[j];
        }
    }

    fn residual(&self, it: &Iterate) -> Residual {
        let n = self.n;
        let sc = &self.scaling;
        let mut px = vec![0.0; n];
        self.p.sym_upper_mul_vec(&it.x, &mut px);
        let mut ety = vec![0.0; n];
        self.e.mul_t_vec(&it.y, &mut ety);
        let mut gtl = vec![0.0; n];
        self.cone_mul_t(&it.lam, &mut gtl);
        let dual: Vec<f64> = (0..n).map(|j| px[j] + self.q[j] + ety[j] + gtl[j]).collect();

        let mut ex = vec![0.0; self.e.nrows];
        self.e.mul_vec(&it.x, &mut ex);
        let eq: Vec<f64> = ex.iter().zip(&self.b).map(|(a, b)| a - b).collect();
        let mut gx = Vec::new();
        self.cone_mul(&it.x, &mut gx);
        let cone: Vec<f64> = (0..self.cones.len()).map(|k| gx[k] + it.s[k] - self.h[k]).collect();

        // Norms in the caller's units.
        let unscale_dual = |v: &[f64]| -> f64 {
            v.iter()
                .zip(&sc.d)
                .fold(0.0_f64, |acc, (x, d)| acc.max((x / (d * sc.c)).abs()))
        };
        let me = self.e.nrows;
        let cone_unscale = |k: usize| -> f64 {
            match self.cones[k] {
                Cone::General(i) => 1.0 / sc.e[me + i],
                Cone::Upper(j) | Cone::Lower(j) => sc.d[j],
            }
        };
        let mut prim = 0.0_f64;
        let mut prim_scale = 0.0_f64;
        for i in 0..me {
            prim = prim.max((eq[i] / sc.e[i]).abs());
            prim_scale = prim_scale.max((ex[i] / sc.e[i]).abs()).max((self.b[i] / sc.e[i]).abs());
        }
        for k in 0..self.cones.len() {
            let f = cone_unscale(k);
            prim = prim.max((cone[k] * f).abs());
            prim_scale = prim_scale.max((gx[k] * f).abs()).max((self.h[k] * f).abs());
        }
        let dual_norm = unscale_dual(&dual);
        let dual_scale = unscale_dual(&px)
            .max(unscale_dual(&self.q))
            .max(unscale_dual(&ety))
            .max(unscale_dual(&gtl));
        let s = &self.settings;
        Residual {
            dual,
            eq,
            cone,
            dual_norm,
            prim_norm: prim,
            eps_dual: s.eps_abs + s.eps_rel * dual_scale,
            eps_prim: s.eps_abs + s.eps_rel * prim_scale,
        }
    }

    /// Factors the augmented matrix for the current cone scaling `w = s/λ`.
    fn factor(&self, w: &[f64]) -> Result<(EnvelopeLdl, Vec<Triplet>), SolverError> {
        let n = self.n;
        let me = self.e.nrows;
        let reg = self.settings.regularization;
        let mut exact: Vec<Triplet> = self.p.triplets().collect();
        let mut diag = vec![0.0; n];
        for (k, c) in self.cones.iter().enumerate() {
            match *c {
                Cone::Upper(j) | Cone::Lower(j) => diag[j] += 1.0 / w[k],
                Cone::General(_) => {}
            }
        }
        exact.extend((0..n).filter(|&j| diag[j] != 0.0).map(|j| (j, j, diag[j])));
        exact.extend(self.e.triplets().map(|(r, c, v)| (n + r, c, v)));
        exact.extend(self.g.triplets().map(|(r, c, v)| (n + me + r, c, v)));
        for (k, c) in self.cones.iter().enumerate() {
            if let Cone::General(i) = *c {
                exact.push((n + me + i, n + me + i, -w[k]));
            }
        }
        let dim = n + me + self.g.nrows;
        let mut entries = exact.clone();
        entries.extend((0..n).map(|j| (j, j, reg)));
        entries.extend((n..dim).map(|i| (i, i, -reg)));
        let signs: Vec<f64> = (0..dim).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
        let factor = EnvelopeLdl::factor_dynamic(
            dim,
            &entries,
            &self.perm,
            Some(&signs),
            self.settings.dynamic_threshold,
            self.settings.dynamic_replacement,
        )?;
        Ok((factor, exact))
    }

    /// Solves the Newton system for right-hand sides `r_d` (dual), `r_e`
    /// (equalities), `r_c` (cone rows) and complementarity target `r_s`,
    /// returning `(Δx, Δy, Δs, Δλ)`.
    #[allow(clippy::too_many_arguments)]
    fn newton(
        &self,
        factor: &EnvelopeLdl,
        exact: &[(usize, usize, f64)],
        it: &Iterate,
        r_d: &[f64],
        r_e: &[f64],
        r_c: &[f64],
        r_s: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n;
        let me = self.e.nrows;
        let mg = self.g.nrows;
        let dim = n + me + mg;
        // Cone rows: G Δx + Δs = −r_c, λΔs + sΔλ = −r_s
        // ⇒ G Δx − (s/λ) Δλ = −r_c + r_s/λ.
        let mut rhs = vec![0.0; dim];
        for j in 0..n {
            rhs[j] = -r_d[j];
        }
        for i in 0..me {
            rhs[n + i] = -r_e[i];
        }
        for (k, c) in self.cones.iter().enumerate() {
            let t = -r_c[k] + r_s[k] / it.lam[k];
            match *c {
                Cone::General(i) => rhs[n + me + i] = t,
                // Δλ = (λ/s)(±Δx_j − t) eliminated into the x block.
                Cone::Upper(j) => rhs[j] += it.lam[k] / it.s[k] * t,
                Cone::Lower(j) => rhs[j] -= it.lam[k] / it.s[k] * t,
            }
        }
        let mut sol = rhs.clone();
        factor.solve_in_place(&mut sol);
        for _ in 0..self.settings.refine_iter {
            let mut r = sym_mul(dim, exact, &sol);
            for i in 0..dim {
                r[i] = rhs[i] - r[i];
            }
            factor.solve_in_place(&mut r);
            for i in 0..dim {
                sol[i] += r[i];
            }
        }
        let dx = sol[..n].to_vec();
        let dy = sol[n..n + me].to_vec();
        let mut dlam = vec![0.0; self.cones.len()];
        let mut ds = vec![0.0; self.cones.len()];
        for (k, c) in self.cones.iter().enumerate() {
            let t = -r_c[k] + r_s[k] / it.lam[k];
            dlam[k] = match *c {
                Cone::General(i) => sol[n + me + i],
                Cone::Upper(j) => it.lam[k] / it.s[k] * (dx[j] - t),
                Cone::Lower(j) => it.lam[k] / it.s[k] * (-dx[j] - t),
            };
            ds[k] = (-r_s[k] - it.s[k] * dlam[k]) / it.lam[k];
        }
        (dx, dy, ds, dlam)
    }

    fn initial_point(&self) -> Result<Iterate, SolverError> {
        let m = self.cones.len();
        let unit = vec![1.0; m];
        let (factor, exact) = self.factor(&unit)?;
        let zero = Iterate {
            x: vec![0.0; self.n],
            y: vec![0.0; self.e.nrows],
            s: unit.clone(),
            lam: unit.clone(),
        };
        // Least-squares start: min ½xᵀPx + qᵀx + ½‖Gx − h‖² s.t. Ex = b.
        let r_c: Vec<f64> = self.h.iter().map(|h| -h).collect();
        let r_s = vec![0.0; m];
        let r_e: Vec<f64> = self.b.iter().map(|b| -b).collect();
        let (x, y, _, lam) = self.newton(&factor, &exact, &zero, &self.q, &r_e, &r_c, &r_s);
        let mut gx = Vec::new();
        self.cone_mul(&x, &mut gx);
        let mut s: Vec<f64> = (0..m).map(|k| self.h[k] - gx[k]).collect();
        let mut lam = lam;
        let shift = |v: &mut Vec<f64>| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            if m > 0 && lo < 1.0 {
                let a = 1.0 - lo.min(0.0);
                v.iter_mut().for_each(|x| *x = (*x + a).max(1.0));
            }
        };
        shift(&mut s);
        shift(&mut lam);
        Ok(Iterate { x, y, s, lam })
    }

    /// Runs predictor-corrector iterations from the standard starting point.
    pub fn solve(&mut self) -> Result<SolveReport, SolverError> {
        let m = self.cones.len();
        let mut it = self.initial_point()?;
        let mut status = Status::MaxIterations;
        let mut iterations = 0;
        let mut trace = Vec::new();
        let mut best_merit = f64::INFINITY;
        let mut stalled = 0;
        let mut res = self.residual(&it);

        for k in 1..=self.settings.max_iter.max(1) {
            iterations = k;
            let gap = dot(&it.s, &it.lam);
            let mu = if m > 0 { gap / m as f64 } else { 0.0 };
            let obj = self.objective_scaled(&it.x) / self.scaling.c + self.constant;
            trace.push(obj);
            let gap_tol = self.settings.eps_abs + self.settings.eps_rel * obj.abs().max(1.0);
            if res.prim_norm <= res.eps_prim && res.dual_norm <= res.eps_dual && gap / self.scaling.c <= gap_tol {
                status = Status::Optimal;
                break;
            }

            let w: Vec<f64> = (0..m).map(|k| it.s[k] / it.lam[k]).collect();
            let (factor, exact) = self.factor(&w)?;

            // Predictor.
            let r_s: Vec<f64> = (0..m).map(|k| it.s[k] * it.lam[k]).collect();
            let (_, _, ds_a, dl_a) = self.newton(&factor, &exact, &it, &res.dual, &res.eq, &res.cone, &r_s);
            let alpha_a = step_to_boundary(&it.s, &ds_a)
                .min(step_to_boundary(&it.lam, &dl_a))
                .min(1.0);
            let mu_a = if m > 0 {
                (0..m)
                    .map(|k| (it.s[k] + alpha_a * ds_a[k]) * (it.lam[k] + alpha_a * dl_a[k]))
                    .sum::<f64>()
                    / m as f64
            } else {
                0.0
            };
            let sigma = if mu > 0.0 {
                (mu_a / mu).clamp(0.0, 1.0).powi(3)
            } else {
                0.0
            };

            // Corrector.
            let r_s: Vec<f64> = (0..m)
                .map(|k| it.s[k] * it.lam[k] + ds_a[k] * dl_a[k] - sigma * mu)
                .collect();
            let (dx, dy, ds, dl) = self.newton(&factor, &exact, &it, &res.dual, &res.eq, &res.cone, &r_s);
            let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
            if !(finite(&dx) && finite(&dy) && finite(&ds) && finite(&dl)) {
                break;
            }
            let alpha = (self.settings.step_fraction
                * step_to_boundary(&it.s, &ds).min(step_to_boundary(&it.lam, &dl)))
            .min(1.0);
            for j in 0..self.n {
                it.x[j] += alpha * dx[j];
            }
            for i in 0..it.y.len() {
                it.y[i] += alpha * dy[i];
            }
            for k in 0..m {
                it.s[k] = (it.s[k] + alpha * ds[k]).max(MIN_CONE);
                it.lam[k] = (it.lam[k] + alpha * dl[k]).max(MIN_CONE);
            }
            res = self.residual(&it);

            let merit = res.prim_norm.max(res.dual_norm).max(gap / self.scaling.c);
            if !merit.is_finite() {
                break;
            }
            if merit < 0.5 * best_merit {
                best_merit = merit;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 15 {
                    break;
                }
            }
        }
        Ok(self.report(&it, &res, status, iterations, trace))
    }

    fn objective_scaled(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; self.n];
        self.p.sym_upper_mul_vec(x, &mut px);
        0.5 * dot(x, &px) + dot(&self.q, x)
    }

    fn report(&self, it: &Iterate, res: &Residual, status: Status, iterations: usize, trace: Vec<f64>) -> SolveReport {
        let n = self.n;
        let sc = &self.scaling;
        let me = self.e.nrows;
        let x: Vec<f64> = (0..n).map(|j| it.x[j] * sc.d[j]).collect();
        let y: Vec<f64> = (0..me).map(|i| it.y[i] * sc.e[i] / sc.c).collect();
        let mut y_bounds = vec![0.0; n];
        let mut y_ineq = vec![0.0; self.g.nrows];
        for (k, c) in self.cones.iter().enumerate() {
            match *c {
                Cone::General(i) => y_ineq[i] = it.lam[k] * sc.e[me + i] / sc.c,
                Cone::Upper(j) => y_bounds[j] += it.lam[k] / (sc.d[j] * sc.c),
                Cone::Lower(j) => y_bounds[j] -= it.lam[k] / (sc.d[j] * sc.c),
            }
        }
        for (r, &j) in self.fixed.iter().enumerate() {
            y_bounds[j] = y[self.n_eq + r];
        }
        SolveReport {
            objective: self.objective_scaled(&it.x) / sc.c + self.constant,
            x,
            y_bounds,
            y_eq: y[..self.n_eq].to_vec(),
            y_ineq,
            primal_residual: res.prim_norm,
            dual_residual: res.dual_norm,
            iterations,
            status,
            polished: false,
            objective_trace: trace,
        }
    }
}

/// Largest step keeping `v + α dv ≥ 0`, capped just above one.
fn step_to_boundary(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0_f64 / 0.99, f64::min)
}

fn sym_mul(n: usize, entries: &[(usize, usize, f64)], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for &(r, c, v) in entries {
        y[r] += v * x[c];
        if r != c {
            y[c] += v * x[r];
        }
    }
    y
}

/// Solves `qp` from scratch.
pub fn solve_ipm(qp: &QuadraticProgram, settings: &IpmSettings) -> Result<SolveReport, SolverError> {
    IpmSolver::new(qp, settings.clone())?.solve()
}
