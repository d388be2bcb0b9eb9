//! Operator-splitting QP solver.
//!
//! Solves `min ½xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u` by ADMM on the splitting
//! `z = Ax`, with Ruiz preconditioning, residual-balanced step size, primal and
//! dual infeasibility certificates, and an active-set polishing step.
//!
//! Variable bounds, equalities and inequalities of a [`QuadraticProgram`] are
//! stacked into a single constraint matrix `[I_B; A_eq; A_in]`, where `I_B`
//! selects the variables that carry at least one finite bound.

use thiserror::Error;

use crate::ldl::{EnvelopeLdl, LdlError};
use crate::ordering::envelope_ordering;
use crate::problem::{ProblemError, QuadraticProgram};
use crate::scaling::Scaling;
use crate::sparse::{dot, inf_norm, CscMatrix};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const DIV_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("KKT factorization failed: {0}")]
    Factorization(#[from] LdlError),
    #[error("warm start has {got} entries, expected {expected}")]
    WarmStart { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_prim_inf: f64,
    pub eps_dual_inf: f64,
    pub max_iter: usize,
    pub scaling_iters: usize,
    pub adaptive_rho: bool,
    pub adaptive_rho_interval: usize,
    pub adaptive_rho_tolerance: f64,
    /// Termination is tested every `check_interval` iterations.
    pub check_interval: usize,
    pub polish: bool,
    pub polish_delta: f64,
    pub polish_refine_iter: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            eps_prim_inf: 1e-5,
            eps_dual_inf: 1e-5,
            max_iter: 50_000,
            scaling_iters: 10,
            adaptive_rho: true,
            adaptive_rho_interval: 25,
            adaptive_rho_tolerance: 5.0,
            check_interval: 5,
            polish: true,
            polish_delta: 1e-7,
            polish_refine_iter: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    MaxIterations,
    PrimalInfeasible,
    DualInfeasible,
}

impl Status {
    pub fn is_optimal(self) -> bool {
        self == Status::Optimal
    }

    pub fn is_infeasible(self) -> bool {
        matches!(self, Status::PrimalInfeasible | Status::DualInfeasible)
    }
}

/// Outcome of a solve, in the caller's (unscaled) units.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    /// Multipliers of the variable bounds (positive at an active upper bound).
    pub y_bounds: Vec<f64>,
    pub y_eq: Vec<f64>,
    /// Multipliers of the `≤` rows, non-negative at optimality.
    pub y_ineq: Vec<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: Status,
    pub polished: bool,
    /// Objective value at every termination check.
    pub objective_trace: Vec<f64>,
}

impl SolveReport {
    /// Running minimum of [`SolveReport::objective_trace`].
    pub fn best_objective_trace(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.objective_trace
            .iter()
            .map(|&v| {
                best = best.min(v);
                best
            })
            .collect()
    }
}

/// Convenience wrapper: build a solver, run it once.
pub fn solve(qp: &QuadraticProgram, settings: &Settings) -> Result<SolveReport, SolverError> {
    let mut solver = Solver::new(qp, settings.clone())?;
    Ok(solver.solve())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Equality,
    Inequality,
    Free,
}

struct Residuals {
    prim: f64,
    dual: f64,
    eps_prim: f64,
    eps_dual: f64,
    prim_scaled_ratio: f64,
    dual_scaled_ratio: f64,
}

/// Reusable solver state; keeps the factorization and the last iterate, so a
/// sequence of problems differing only in the linear term is warm-started.
pub struct Solver {
    settings: Settings,
    n: usize,
    m: usize,
    bound_vars: Vec<usize>,
    n_eq: usize,
    n_ineq: usize,
    constant: f64,
    // scaled data
    p: CscMatrix,
    a: CscMatrix,
    q: Vec<f64>,
    l: Vec<f64>,
    u: Vec<f64>,
    scaling: Scaling,
    kinds: Vec<RowKind>,
    rho: f64,
    rho_vec: Vec<f64>,
    perm: Vec<usize>,
    kkt: EnvelopeLdl,
    // scaled iterates
    x: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
    refactorizations: usize,
}

impl Solver {
    pub fn new(qp: &QuadraticProgram, settings: Settings) -> Result<Self, SolverError> {
        qp.validate()?;
        let n = qp.num_vars();
        let bound_vars: Vec<usize> = (0..n)
            .filter(|&i| qp.lower[i].is_finite() || qp.upper[i].is_finite())
            .collect();
        let nb = bound_vars.len();
        let bound_rows: Vec<(usize, usize, f64)> = bound_vars.iter().enumerate().map(|(r, &v)| (r, v, 1.0)).collect();
        let a = CscMatrix::from_triplets(nb, n, &bound_rows)
            .vstack(&qp.eq_matrix)
            .vstack(&qp.ineq_matrix);
        let m = a.nrows;

        let mut l = Vec::with_capacity(m);
        let mut u = Vec::with_capacity(m);
        for &v in &bound_vars {
            l.push(qp.lower[v]);
            u.push(qp.upper[v]);
        }
        l.extend_from_slice(&qp.eq_rhs);
        u.extend_from_slice(&qp.eq_rhs);
        l.extend(std::iter::repeat_n(f64::NEG_INFINITY, qp.num_ineq()));
        u.extend_from_slice(&qp.ineq_rhs);

        let mut p = qp.quadratic.clone();
        let mut a = a;
        let mut q = qp.linear.clone();
        let scaling = if settings.scaling_iters > 0 {
            Scaling::equilibrate(&mut p, &mut a, &mut q, settings.scaling_iters)
        } else {
            Scaling::identity(n, m)
        };
        for i in 0..m {
            l[i] *= scaling.e[i];
            u[i] *= scaling.e[i];
        }

        let kinds: Vec<RowKind> = (0..m)
            .map(|i| {
                if l[i] == u[i] {
                    RowKind::Equality
                } else if l[i].is_infinite() && u[i].is_infinite() {
                    RowKind::Free
                } else {
                    RowKind::Inequality
                }
            })
            .collect();

        let mut adjacency = vec![Vec::new(); n + m];
        for (r, c, _) in p.triplets() {
            if r != c {
                adjacency[r].push(c);
                adjacency[c].push(r);
            }
        }
        for (r, c, _) in a.triplets() {
            adjacency[n + r].push(c);
            adjacency[c].push(n + r);
        }
        let perm = envelope_ordering(&adjacency);

        let rho = settings.rho.clamp(RHO_MIN, RHO_MAX);
        let rho_vec = rho_vector(&kinds, rho);
        let kkt = factor_kkt(&p, &a, settings.sigma, &rho_vec, &perm)?;

        Ok(Self {
            n,
            m,
            n_eq: qp.num_eq(),
            n_ineq: qp.num_ineq(),
            bound_vars,
            constant: qp.constant,
            p,
            a,
            q,
            l,
            u,
            scaling,
            kinds,
            rho,
            rho_vec,
            perm,
            kkt,
            x: vec![0.0; n],
            z: vec![0.0; m],
            y: vec![0.0; m],
            refactorizations: 1,
            settings,
        })
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn refactorizations(&self) -> usize {
        self.refactorizations
    }

    /// Replaces the linear objective term, keeping scaling and factorization.
    pub fn update_linear(&mut self, linear: &[f64]) {
        assert_eq!(linear.len(), self.n);
        for j in 0..self.n {
            self.q[j] = self.scaling.c * self.scaling.d[j] * linear[j];
        }
    }

    /// Warm-starts from an unscaled primal point and (optionally) multipliers
    /// in the `[bounds; eq; ineq]` layout of [`SolveReport`].
    pub fn warm_start(&mut self, x: &[f64], y: Option<(&[f64], &[f64], &[f64])>) -> Result<(), SolverError> {
        if x.len() != self.n {
            return Err(SolverError::WarmStart {
                got: x.len(),
                expected: self.n,
            });
        }
        for j in 0..self.n {
            self.x[j] = x[j] / self.scaling.d[j];
        }
        self.a.mul_vec(&self.x, &mut self.z);
        for i in 0..self.m {
            self.z[i] = self.z[i].clamp(self.l[i], self.u[i]);
        }
        match y {
            Some((yb, ye, yi)) => {
                let stacked: Vec<f64> = yb.iter().chain(ye).chain(yi).copied().collect();
                if stacked.len() != self.m {
                    return Err(SolverError::WarmStart {
                        got: stacked.len(),
                        expected: self.m,
                    });
                }
                for i in 0..self.m {
                    self.y[i] = stacked[i] * self.scaling.c / self.scaling.e[i];
                }
            }
            None => self.y.iter_mut().for_each(|v| *v = 0.0),
        }
        Ok(())
    }

    /// Runs the iteration from the current (possibly warm) iterate.
    pub fn solve(&mut self) -> SolveReport {
        let s = self.settings.clone();
        let (n, m) = (self.n, self.m);
        let mut rhs = vec![0.0; n + m];
        let mut x_prev = self.x.clone();
        let mut y_prev = self.y.clone();
        let mut objective_trace = Vec::new();
        let mut status = Status::MaxIterations;
        let mut iterations = 0;
        let mut last_res = None;

        for k in 1..=s.max_iter.max(1) {
            iterations = k;
            x_prev.copy_from_slice(&self.x);
            y_prev.copy_from_slice(&self.y);

            for j in 0..n {
                rhs[j] = s.sigma * self.x[j] - self.q[j];
            }
            for i in 0..m {
                rhs[n + i] = self.z[i] - self.y[i] / self.rho_vec[i];
            }
            self.kkt.solve_in_place(&mut rhs);
            for j in 0..n {
                self.x[j] = s.alpha * rhs[j] + (1.0 - s.alpha) * x_prev[j];
            }
            for i in 0..m {
                let z_tilde = self.z[i] + (rhs[n + i] - self.y[i]) / self.rho_vec[i];
                let z_hat = s.alpha * z_tilde + (1.0 - s.alpha) * self.z[i];
                let z_new = (z_hat + self.y[i] / self.rho_vec[i]).clamp(self.l[i], self.u[i]);
                self.y[i] += self.rho_vec[i] * (z_hat - z_new);
                self.z[i] = z_new;
            }

            let check = k % s.check_interval.max(1) == 0 || k == s.max_iter;
            let adapt = s.adaptive_rho && k % s.adaptive_rho_interval.max(1) == 0;
            if !(check || adapt) {
                continue;
            }
            let res = self.residuals(&self.x, &self.z, &self.y);
            if check {
                objective_trace.push(self.unscaled_objective(&self.x));
                if res.prim <= res.eps_prim && res.dual <= res.eps_dual {
                    status = Status::Optimal;
                    last_res = Some(res);
                    break;
                }
                if self.primal_infeasible(&y_prev) {
                    status = Status::PrimalInfeasible;
                    last_res = Some(res);
                    break;
                }
                if self.dual_infeasible(&x_prev) {
                    status = Status::DualInfeasible;
                    last_res = Some(res);
                    break;
                }
            }
            if adapt {
                let ratio = (res.prim_scaled_ratio / res.dual_scaled_ratio.max(DIV_TOL)).sqrt();
                let new_rho = (self.rho * ratio).clamp(RHO_MIN, RHO_MAX);
                if new_rho > self.rho * s.adaptive_rho_tolerance || new_rho < self.rho / s.adaptive_rho_tolerance {
                    self.set_rho(new_rho);
                }
            }
            last_res = Some(res);
        }

        let res = last_res.unwrap_or_else(|| self.residuals(&self.x, &self.z, &self.y));
        let mut report = self.report(status, iterations, &res, objective_trace);
        if status == Status::Optimal && s.polish {
            self.polish(&res, &mut report);
        }
        report
    }

    fn set_rho(&mut self, rho: f64) {
        self.rho = rho;
        self.rho_vec = rho_vector(&self.kinds, rho);
        // A failed refactorization keeps the previous, still valid, factors.
        if let Ok(kkt) = factor_kkt(&self.p, &self.a, self.settings.sigma, &self.rho_vec, &self.perm) {
            self.kkt = kkt;
            self.refactorizations += 1;
        }
    }

    fn residuals(&self, x: &[f64], z: &[f64], y: &[f64]) -> Residuals {
        let (n, m) = (self.n, self.m);
        let sc = &self.scaling;
        let mut ax = vec![0.0; m];
        self.a.mul_vec(x, &mut ax);
        let mut px = vec![0.0; n];
        self.p.sym_upper_mul_vec(x, &mut px);
        let mut aty = vec![0.0; n];
        self.a.mul_t_vec(y, &mut aty);

        let mut prim = 0.0_f64;
        let mut ax_norm = 0.0_f64;
        let mut z_norm = 0.0_f64;
        let mut prim_s = 0.0_f64;
        let mut ax_norm_s = 0.0_f64;
        let mut z_norm_s = 0.0_f64;
        for i in 0..m {
            let ei = 1.0 / sc.e[i];
            prim = prim.max(((ax[i] - z[i]) * ei).abs());
            ax_norm = ax_norm.max((ax[i] * ei).abs());
            z_norm = z_norm.max((z[i] * ei).abs());
            prim_s = prim_s.max((ax[i] - z[i]).abs());
            ax_norm_s = ax_norm_s.max(ax[i].abs());
            z_norm_s = z_norm_s.max(z[i].abs());
        }
        let cinv = 1.0 / sc.c;
        let mut dual = 0.0_f64;
        let mut px_norm = 0.0_f64;
        let mut aty_norm = 0.0_f64;
        let mut q_norm = 0.0_f64;
        let mut dual_s = 0.0_f64;
        let mut px_norm_s = 0.0_f64;
        let mut aty_norm_s = 0.0_f64;
        let mut q_norm_s = 0.0_f64;
        for j in 0..n {
            let dj = cinv / sc.d[j];
            let g = px[j] + self.q[j] + aty[j];
            dual = dual.max((g * dj).abs());
            px_norm = px_norm.max((px[j] * dj).abs());
            aty_norm = aty_norm.max((aty[j] * dj).abs());
            q_norm = q_norm.max((self.q[j] * dj).abs());
            dual_s = dual_s.max(g.abs());
            px_norm_s = px_norm_s.max(px[j].abs());
            aty_norm_s = aty_norm_s.max(aty[j].abs());
            q_norm_s = q_norm_s.max(self.q[j].abs());
        }
        let s = &self.settings;
        Residuals {
            prim,
            dual,
            eps_prim: s.eps_abs + s.eps_rel * ax_norm.max(z_norm),
            eps_dual: s.eps_abs + s.eps_rel * px_norm.max(aty_norm).max(q_norm),
            prim_scaled_ratio: prim_s / ax_norm_s.max(z_norm_s).max(DIV_TOL),
            dual_scaled_ratio: dual_s / px_norm_s.max(aty_norm_s).max(q_norm_s).max(DIV_TOL),
        }
    }

    fn primal_infeasible(&self, y_prev: &[f64]) -> bool {
        let m = self.m;
        let mut dy: Vec<f64> = (0..m).map(|i| self.y[i] - y_prev[i]).collect();
        for i in 0..m {
            if self.u[i] == f64::INFINITY {
                dy[i] = dy[i].min(0.0);
            }
            if self.l[i] == f64::NEG_INFINITY {
                dy[i] = dy[i].max(0.0);
            }
        }
        let norm = dy
            .iter()
            .zip(&self.scaling.e)
            .fold(0.0_f64, |acc, (v, e)| acc.max((v * e).abs()));
        if norm < DIV_TOL {
            return false;
        }
        let eps = self.settings.eps_prim_inf * norm;
        let mut support = 0.0;
        for i in 0..m {
            if dy[i] > 0.0 {
                support += self.u[i] * dy[i];
            } else if dy[i] < 0.0 {
                support += self.l[i] * dy[i];
            }
        }
        if support >= -eps {
            return false;
        }
        let mut atdy = vec![0.0; self.n];
        self.a.mul_t_vec(&dy, &mut atdy);
        atdy.iter()
            .zip(&self.scaling.d)
            .fold(0.0_f64, |acc, (v, d)| acc.max((v / d).abs()))
            <= eps
    }

    fn dual_infeasible(&self, x_prev: &[f64]) -> bool {
        let (n, m) = (self.n, self.m);
        let dx: Vec<f64> = (0..n).map(|j| self.x[j] - x_prev[j]).collect();
        let norm = dx
            .iter()
            .zip(&self.scaling.d)
            .fold(0.0_f64, |acc, (v, d)| acc.max((v * d).abs()));
        if norm < DIV_TOL {
            return false;
        }
        let eps = self.settings.eps_dual_inf * norm;
        if dot(&self.q, &dx) / self.scaling.c >= -eps {
            return false;
        }
        let mut pdx = vec![0.0; n];
        self.p.sym_upper_mul_vec(&dx, &mut pdx);
        let pdx_norm = pdx
            .iter()
            .zip(&self.scaling.d)
            .fold(0.0_f64, |acc, (v, d)| acc.max((v / d).abs()))
            / self.scaling.c;
        if pdx_norm > eps {
            return false;
        }
        let mut adx = vec![0.0; m];
        self.a.mul_vec(&dx, &mut adx);
        (0..m).all(|i| {
            let v = adx[i] / self.scaling.e[i];
            match (self.l[i].is_finite(), self.u[i].is_finite()) {
                (true, true) => v.abs() <= eps,
                (true, false) => v >= -eps,
                (false, true) => v <= eps,
                (false, false) => true,
            }
        })
    }

    fn unscaled_objective(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; self.n];
        self.p.sym_upper_mul_vec(x, &mut px);
        (0.5 * dot(x, &px) + dot(&self.q, x)) / self.scaling.c + self.constant
    }

    fn report(&self, status: Status, iterations: usize, res: &Residuals, trace: Vec<f64>) -> SolveReport {
        let x: Vec<f64> = (0..self.n).map(|j| self.x[j] * self.scaling.d[j]).collect();
        let y: Vec<f64> = (0..self.m)
            .map(|i| self.y[i] * self.scaling.e[i] / self.scaling.c)
            .collect();
        let nb = self.bound_vars.len();
        let mut y_bounds = vec![0.0; self.n];
        for (r, &v) in self.bound_vars.iter().enumerate() {
            y_bounds[v] = y[r];
        }
        SolveReport {
            objective: self.unscaled_objective(&self.x),
            x,
            y_bounds,
            y_eq: y[nb..nb + self.n_eq].to_vec(),
            y_ineq: y[nb + self.n_eq..nb + self.n_eq + self.n_ineq].to_vec(),
            primal_residual: res.prim,
            dual_residual: res.dual,
            iterations,
            status,
            polished: false,
            objective_trace: trace,
        }
    }

    /// Solves the equality-constrained QP on the guessed active set and keeps
    /// the result when it is at least as accurate as the ADMM iterate.
    fn polish(&mut self, res: &Residuals, report: &mut SolveReport) {
        let (n, m) = (self.n, self.m);
        let mut active = Vec::new();
        let mut target = Vec::new();
        let mut side = Vec::new();
        for i in 0..m {
            match self.kinds[i] {
                RowKind::Equality => {
                    active.push(i);
                    target.push(self.l[i]);
                    side.push(0);
                }
                RowKind::Free => {}
                RowKind::Inequality => {
                    if self.z[i] - self.l[i] < -self.y[i] {
                        active.push(i);
                        target.push(self.l[i]);
                        side.push(-1);
                    } else if self.u[i] - self.z[i] < self.y[i] {
                        active.push(i);
                        target.push(self.u[i]);
                        side.push(1);
                    }
                }
            }
        }
        let k = active.len();
        let a_act = self.a.select_rows(&active);
        let delta = self.settings.polish_delta;
        let mut entries: Vec<(usize, usize, f64)> = self.p.triplets().collect();
        let mut exact: Vec<(usize, usize, f64)> = entries.clone();
        for j in 0..n {
            entries.push((j, j, delta));
        }
        for (r, c, v) in a_act.triplets() {
            entries.push((n + r, c, v));
            exact.push((n + r, c, v));
        }
        for r in 0..k {
            entries.push((n + r, n + r, -delta));
        }
        let mut adjacency = vec![Vec::new(); n + k];
        for &(r, c, _) in &entries {
            if r != c {
                adjacency[r].push(c);
                adjacency[c].push(r);
            }
        }
        let perm = envelope_ordering(&adjacency);
        let signs: Vec<f64> = (0..n + k).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
        let Ok(factor) = EnvelopeLdl::factor(n + k, &entries, &perm, Some(&signs), delta * 1e-3) else {
            return;
        };

        let mut b = vec![0.0; n + k];
        for j in 0..n {
            b[j] = -self.q[j];
        }
        b[n..].copy_from_slice(&target);
        let mut sol = b.clone();
        factor.solve_in_place(&mut sol);
        for _ in 0..self.settings.polish_refine_iter {
            let mut r = sym_mul(n + k, &exact, &sol);
            for i in 0..n + k {
                r[i] = b[i] - r[i];
            }
            factor.solve_in_place(&mut r);
            for i in 0..n + k {
                sol[i] += r[i];
            }
        }

        let x_pol = sol[..n].to_vec();
        let mut y_pol = vec![0.0; m];
        for (r, &i) in active.iter().enumerate() {
            y_pol[i] = sol[n + r];
        }
        // Multiplier signs must match the side of the active bound.
        let sign_tol = 1e-9 * inf_norm(&y_pol).max(1.0);
        for (r, &i) in active.iter().enumerate() {
            let bad = match side[r] {
                -1 => y_pol[i] > sign_tol,
                1 => y_pol[i] < -sign_tol,
                _ => false,
            };
            if bad {
                return;
            }
        }
        let mut z_pol = vec![0.0; m];
        self.a.mul_vec(&x_pol, &mut z_pol);
        for i in 0..m {
            z_pol[i] = z_pol[i].clamp(self.l[i], self.u[i]);
        }
        let pres = self.residuals(&x_pol, &z_pol, &y_pol);
        let floor = 1e-3 * self.settings.eps_abs;
        if pres.prim <= res.prim.max(floor) && pres.dual <= res.dual.max(floor) {
            self.x = x_pol;
            self.z = z_pol;
            self.y = y_pol;
            let trace = std::mem::take(&mut report.objective_trace);
            *report = self.report(Status::Optimal, report.iterations, &pres, trace);
            report.polished = true;
        }
    }
}

fn rho_vector(kinds: &[RowKind], rho: f64) -> Vec<f64> {
    kinds
        .iter()
        .map(|k| match k {
            RowKind::Equality => RHO_EQ_FACTOR * rho,
            RowKind::Inequality => rho,
            RowKind::Free => RHO_MIN,
        })
        .collect()
}

fn factor_kkt(p: &CscMatrix, a: &CscMatrix, sigma: f64, rho: &[f64], perm: &[usize]) -> Result<EnvelopeLdl, LdlError> {
    let n = p.ncols;
    let m = a.nrows;
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(p.nnz() + a.nnz() + n + m);
    entries.extend(p.triplets());
    entries.extend((0..n).map(|j| (j, j, sigma)));
    entries.extend(a.triplets().map(|(r, c, v)| (n + r, c, v)));
    entries.extend((0..m).map(|i| (n + i, n + i, -1.0 / rho[i])));
    let signs: Vec<f64> = (0..n + m).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
    EnvelopeLdl::factor(n + m, &entries, perm, Some(&signs), 1e-14)
}

fn sym_mul(n: usize, entries: &[(usize, usize, f64)], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for &(i, j, v) in entries {
        y[i] += v * x[j];
        if i != j {
            y[j] += v * x[i];
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::QpBuilder;

    fn tight() -> Settings {
        Settings {
            eps_abs: 1e-9,
            eps_rel: 1e-9,
            ..Settings::default()
        }
    }

    #[test]
    fn projection_onto_orthant() {
        // ‖x − c‖² with c = (1, −1), x ≥ 0
        let mut b = QpBuilder::new(2);
        b.add_quadratic(0, 0, 2.0);
        b.add_quadratic(1, 1, 2.0);
        b.add_linear(0, -2.0);
        b.add_linear(1, 2.0);
        b.constant = 2.0;
        b.set_bounds(0, 0.0, f64::INFINITY);
        b.set_bounds(1, 0.0, f64::INFINITY);
        let r = solve(&b.build(), &tight()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-8 && r.x[1].abs() < 1e-8, "{:?}", r.x);
        assert!((r.objective - 1.0).abs() < 1e-8);
        assert!(r.y_bounds[1] < 0.0);
    }

    #[test]
    fn symmetric_equality() {
        let mut b = QpBuilder::new(2);
        b.add_quadratic(0, 0, 2.0);
        b.add_quadratic(1, 1, 2.0);
        b.add_eq(&[(0, 1.0), (1, 1.0)], 1.0);
        let r = solve(&b.build(), &tight()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 0.5).abs() < 1e-8 && (r.x[1] - 0.5).abs() < 1e-8);
        assert!((r.y_eq[0] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn linear_program_with_inequalities() {
        // min −x − y  s.t. x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0  → (1.6, 1.2)
        let mut b = QpBuilder::new(2);
        b.add_linear(0, -1.0);
        b.add_linear(1, -1.0);
        b.set_bounds(0, 0.0, f64::INFINITY);
        b.set_bounds(1, 0.0, f64::INFINITY);
        b.add_le(&[(0, 1.0), (1, 2.0)], 4.0);
        b.add_le(&[(0, 3.0), (1, 1.0)], 6.0);
        let r = solve(&b.build(), &tight()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 1.6).abs() < 1e-7 && (r.x[1] - 1.2).abs() < 1e-7, "{:?}", r.x);
        assert!(r.y_ineq.iter().all(|&v| v >= -1e-9));
    }

    #[test]
    fn detects_primal_infeasibility() {
        let mut b = QpBuilder::new(1);
        b.add_quadratic(0, 0, 1.0);
        b.set_bounds(0, 0.0, 1.0);
        b.add_eq(&[(0, 1.0)], 2.0);
        let r = solve(&b.build(), &Settings::default()).unwrap();
        assert_eq!(r.status, Status::PrimalInfeasible);
    }

    #[test]
    fn detects_unbounded_objective() {
        let mut b = QpBuilder::new(2);
        b.add_linear(0, -1.0);
        b.set_bounds(0, 0.0, f64::INFINITY);
        b.add_le(&[(1, 1.0)], 1.0);
        let r = solve(&b.build(), &Settings::default()).unwrap();
        assert_eq!(r.status, Status::DualInfeasible);
    }

    #[test]
    fn warm_start_and_linear_update() {
        let mut b = QpBuilder::new(1);
        b.add_quadratic(0, 0, 1.0);
        b.add_linear(0, -3.0);
        b.set_bounds(0, 0.0, 2.0);
        let qp = b.build();
        let mut solver = Solver::new(&qp, tight()).unwrap();
        let first = solver.solve();
        assert!((first.x[0] - 2.0).abs() < 1e-9);
        solver.update_linear(&[-1.0]);
        let second = solver.solve();
        assert!((second.x[0] - 1.0).abs() < 1e-9);
        assert!(second.iterations <= first.iterations + 25);
    }
}
