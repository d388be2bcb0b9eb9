//! Consensus ADMM over scenarios.
//!
//! Every iteration solves all scenario x-updates in parallel, forms the
//! global design `z_d` (clipped to the capacity boxes) and boundary states
//! `z_b` in closed form, then updates the duals. `ρ` adapts to the balance of
//! primal and dual residuals.

use std::io::Write;

use gridplan_qp::{IpmSolver, SolveReport, Solver, Status};
use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::BoundaryMap;
use crate::model::{GlobalPlan, RatioPolicy, ScenarioData, ScenarioVariables, SystemSpec};
use crate::subqp::{assemble_base, QpMethod, ScenarioQp, SubqpError, SubqpSettings};

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error("scenario {scenario}: {source}")]
    Subproblem {
        scenario: usize,
        #[source]
        source: SubqpError,
    },
    #[error("scenario {scenario} is infeasible")]
    Infeasible { scenario: usize },
    #[error("scenario {scenario}: subproblem is unbounded")]
    Unbounded { scenario: usize },
    #[error("invalid setup: {0}")]
    Setup(String),
}

/// How the duals follow a change of `ρ`.
///
/// `v` is the unscaled multiplier, so at a fixed point it equals the optimal
/// multiplier whatever `ρ` is; keeping it is the default. Rescaling it with
/// `ρ` moves the iterate off the fixed point at every change, and together
/// with residual balancing this can cycle without converging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualRescale {
    /// `v ← v · ρ'/ρ`, keeping the scaled dual `v/ρ`.
    KeepScaled,
    /// Leave `v` untouched (the scaled dual becomes `v/ρ'`).
    #[default]
    KeepUnscaled,
}

/// Which residuals the adaptive rule compares.
///
/// The primal residual is in plan units and the dual residual in cost per
/// plan unit, so comparing them directly depends on the currency. Dividing
/// each by its stopping threshold makes the comparison unit-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhoBalance {
    /// `‖r^p‖` against `‖r^d‖`.
    Absolute,
    /// `‖r^p‖/eps_p` against `‖r^d‖/eps_d`.
    #[default]
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub rho0: f64,
    pub tau: f64,
    pub mu: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iterations: usize,
    pub adaptive_rho: bool,
    /// `ρ` is only adapted during this many iterations and then held fixed,
    /// which restores the fixed-penalty convergence guarantee.
    pub adapt_iterations: usize,
    pub rho_balance: RhoBalance,
    pub dual_rescale: DualRescale,
    pub subqp: SubqpSettings,
}

const ADAPT_DEFAULT: usize = 100;

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            tau: 2.0,
            mu: 10.0,
            eps_abs: 1e-5,
            eps_rel: 1e-4,
            max_iterations: 2000,
            adaptive_rho: true,
            adapt_iterations: ADAPT_DEFAULT,
            rho_balance: RhoBalance::Normalized,
            dual_rescale: DualRescale::KeepUnscaled,
            subqp: SubqpSettings::default(),
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<(), AdmmError> {
        if !(self.tau > 1.0 && self.mu > 1.0) {
            return Err(AdmmError::Setup(format!(
                "tau = {} and mu = {} must exceed 1",
                self.tau, self.mu
            )));
        }
        if !(self.rho0 > 0.0) {
            return Err(AdmmError::Setup(format!("rho0 = {} must be positive", self.rho0)));
        }
        if !(self.eps_abs >= 0.0 && self.eps_rel >= 0.0) || self.eps_abs + self.eps_rel == 0.0 {
            return Err(AdmmError::Setup(
                "convergence thresholds must be non-negative and not both zero".into(),
            ));
        }
        Ok(())
    }
}

/// One line of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub r_p_norm: f64,
    pub r_d_norm: f64,
    pub rho: f64,
    /// `Σ_j f^j(x^j)` at the current local iterates.
    pub objective_estimate: f64,
}

/// Stopping test quantities at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    /// `sqrt(Σ_j ‖x^j − z̃^j‖²)`
    pub primal: f64,
    /// `ρ sqrt(Σ_j ‖z̃^j_k − z̃^j_{k−1}‖²)`
    pub dual: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
}

impl Convergence {
    pub fn converged(&self) -> bool {
        self.primal <= self.eps_primal && self.dual <= self.eps_dual
    }
}

/// Iterates of the consensus ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    /// Consensus part `x^j = [x^j_d; x^j_b]` of every scenario.
    pub x: Vec<Vec<f64>>,
    pub z: GlobalPlan,
    /// Global vector of the previous iteration; `None` before the first z-update.
    pub z_prev: Option<GlobalPlan>,
    pub v: Vec<Vec<f64>>,
    pub rho: f64,
    /// `(‖r^p‖, ‖r^d‖)` per iteration, as used by the stopping test.
    pub history: Vec<(f64, f64)>,
    pub k: usize,
    pub map: BoundaryMap,
}

impl AdmmState {
    /// Zero duals and locals, `z_d` at the lower capacity bounds and `z_b = 0`.
    pub fn initial(system: &SystemSpec, map: &BoundaryMap, rho: f64) -> Self {
        let design: Vec<f64> = system.design_bounds().iter().map(|b| b.0).collect();
        let z = GlobalPlan {
            design,
            boundary: vec![0.0; map.groups],
        };
        let x: Vec<Vec<f64>> = (0..map.scenarios()).map(|j| z_tilde(&z, map, j)).collect();
        let v = x.iter().map(|xj| vec![0.0; xj.len()]).collect();
        Self {
            x,
            z,
            z_prev: None,
            v,
            rho,
            history: Vec::new(),
            k: 0,
            map: map.clone(),
        }
    }

    pub fn design_len(&self) -> usize {
        self.z.design.len()
    }

    pub fn z_tilde(&self, j: usize) -> Vec<f64> {
        z_tilde(&self.z, &self.map, j)
    }
}

/// `z̃^j = [z_d; z_b restricted to the entries bound by j]`.
pub fn z_tilde(z: &GlobalPlan, map: &BoundaryMap, j: usize) -> Vec<f64> {
    let mut out = z.design.clone();
    out.extend(map.group_of(j).iter().map(|&g| z.boundary[g]));
    out
}

/// `clip(mean_j(x^j_d + v^j_d/ρ))` into the capacity boxes.
pub fn z_update_design(xs: &[&[f64]], vs: &[&[f64]], rho: f64, bounds: &[(f64, f64)]) -> Vec<f64> {
    let n = bounds.len();
    let count = xs.len() as f64;
    (0..n)
        .map(|i| {
            let sum: f64 = xs.iter().zip(vs).map(|(x, v)| x[i] + v[i] / rho).sum();
            (sum / count).clamp(bounds[i].0, bounds[i].1)
        })
        .collect()
}

/// Per-group mean of `x^j_b + v^j_b/ρ` over the local entries bound to each
/// global index. `xs[j]` and `vs[j]` hold only the boundary part of scenario `j`.
pub fn z_update_boundary(xs: &[&[f64]], vs: &[&[f64]], rho: f64, map: &BoundaryMap) -> Result<Vec<f64>, AdmmError> {
    let mut sum = vec![0.0; map.groups];
    let mut count = vec![0usize; map.groups];
    for (j, groups) in map.element_of.iter().enumerate() {
        if groups.is_empty() {
            continue;
        }
        if xs[j].len() != groups.len() || vs[j].len() != groups.len() {
            return Err(AdmmError::Setup(format!(
                "scenario {j} boundary vector length mismatch"
            )));
        }
        for (i, &g) in groups.iter().enumerate() {
            sum[g] += xs[j][i] + vs[j][i] / rho;
            count[g] += 1;
        }
    }
    if let Some(g) = count.iter().position(|&c| c == 0) {
        return Err(AdmmError::Setup(format!("global boundary index {g} has no binding")));
    }
    Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
}

/// `v + ρ(x − z̃)`
pub fn dual_update(x: &[f64], z_tilde: &[f64], v: &[f64], rho: f64) -> Vec<f64> {
    x.iter()
        .zip(z_tilde)
        .zip(v)
        .map(|((x, z), v)| v + rho * (x - z))
        .collect()
}

/// `(‖(1/J) Σ_j (x^j − z̃^j)‖, ‖ρ (z_k − z_{k−1})‖)`. The dual residual is
/// zero before the first z-update.
///
/// Note that after an unclipped z-update the averaged primal residual
/// vanishes identically; the stopping test uses [`convergence`] instead.
pub fn residuals(state: &AdmmState) -> (f64, f64) {
    let width = state.x.iter().map(Vec::len).max().unwrap_or(0);
    let mut mean = vec![0.0; width];
    let count = state.x.len().max(1) as f64;
    for (j, x) in state.x.iter().enumerate() {
        for (i, (a, b)) in x.iter().zip(state.z_tilde(j)).enumerate() {
            mean[i] += (a - b) / count;
        }
    }
    let r_p = norm(&mean);
    let r_d = match &state.z_prev {
        Some(prev) => {
            state.rho
                * norm(
                    &state
                        .z
                        .to_vec()
                        .iter()
                        .zip(prev.to_vec())
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                )
        }
        None => 0.0,
    };
    (r_p, r_d)
}

/// Stacked residuals and thresholds
/// `eps_p = eps_abs √n + eps_rel max(‖x‖, ‖z̃‖)`, `eps_d = eps_abs √n + eps_rel ‖v‖`,
/// all norms over the stacked local vectors of length `n`.
pub fn convergence(state: &AdmmState, eps_abs: f64, eps_rel: f64) -> Convergence {
    let (mut gap, mut step, mut xn, mut zn, mut vn, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0usize);
    for j in 0..state.x.len() {
        let zt = state.z_tilde(j);
        let zp = state.z_prev.as_ref().map(|p| z_tilde(p, &state.map, j));
        for (i, (&x, &z)) in state.x[j].iter().zip(&zt).enumerate() {
            gap += (x - z) * (x - z);
            if let Some(zp) = &zp {
                step += (z - zp[i]) * (z - zp[i]);
            }
            xn += x * x;
            zn += z * z;
            vn += state.v[j][i] * state.v[j][i];
        }
        n += zt.len();
    }
    let root_n = (n as f64).sqrt();
    let dual = if state.z_prev.is_some() {
        state.rho * step.sqrt()
    } else {
        f64::INFINITY
    };
    Convergence {
        primal: gap.sqrt(),
        dual,
        eps_primal: eps_abs * root_n + eps_rel * xn.sqrt().max(zn.sqrt()),
        eps_dual: eps_abs * root_n + eps_rel * vn.sqrt(),
    }
}

/// `τρ` when `‖r^p‖ > μ‖r^d‖`, `ρ/τ` when `‖r^d‖ > μ‖r^p‖`, else `ρ`.
pub fn adapt_rho(rho: f64, r_p_norm: f64, r_d_norm: f64, tau: f64, mu: f64) -> f64 {
    if r_p_norm > mu * r_d_norm {
        tau * rho
    } else if r_d_norm > mu * r_p_norm {
        rho / tau
    } else {
        rho
    }
}

/// Adjusts every dual for a change of `ρ` from `old` to `new`.
pub fn rescale_duals(v: &mut [Vec<f64>], old: f64, new: f64, mode: DualRescale) {
    if mode == DualRescale::KeepScaled {
        let f = new / old;
        v.iter_mut().flatten().for_each(|x| *x *= f);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The planning problem handed to [`run`].
#[derive(Debug, Clone)]
pub struct ConsensusProblem {
    pub system: SystemSpec,
    pub policy: RatioPolicy,
    pub scenarios: Vec<ScenarioData>,
    pub map: BoundaryMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmmStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub plan: GlobalPlan,
    pub state: AdmmState,
    pub trace: Vec<TraceRow>,
    pub status: AdmmStatus,
    /// Final local solutions, one per scenario.
    pub scenarios: Vec<ScenarioVariables>,
    /// `Σ_j f^j(x^j)` at the final local solutions.
    pub objective: f64,
    /// Thresholds and residuals of the last stopping test.
    pub convergence: Convergence,
    /// Subproblem solves that hit the inner iteration limit.
    pub inexact_solves: usize,
}

enum Backend {
    Splitting(Box<Solver>),
    InteriorPoint(Box<IpmSolver>),
}

struct Worker {
    sqp: ScenarioQp,
    backend: Option<Backend>,
    backend_rho: f64,
    last: Option<SolveReport>,
}

impl Worker {
    fn solve(&mut self, z_t: &[f64], v: &[f64], rho: f64, settings: &SubqpSettings) -> Result<SolveReport, SubqpError> {
        let reuse = self.backend.is_some() && self.backend_rho == rho;
        if let (true, Some(backend)) = (reuse, self.backend.as_mut()) {
            let (linear, constant) = self.sqp.penalized_linear(z_t, v, rho);
            self.sqp.qp.linear = linear;
            self.sqp.qp.constant = constant;
            match backend {
                Backend::Splitting(s) => s.update_linear(&self.sqp.qp.linear),
                Backend::InteriorPoint(s) => s.update_linear(&self.sqp.qp.linear),
            }
        } else {
            self.sqp.set_penalty(z_t, v, rho)?;
            let backend = match settings.method {
                QpMethod::InteriorPoint => {
                    Backend::InteriorPoint(Box::new(IpmSolver::new(&self.sqp.qp, settings.ipm_settings())?))
                }
                QpMethod::OperatorSplitting => {
                    let mut solver = Solver::new(&self.sqp.qp, settings.solver_settings())?;
                    if let Some(last) = &self.last {
                        solver.warm_start(&last.x, Some((&last.y_bounds, &last.y_eq, &last.y_ineq)))?;
                    }
                    Backend::Splitting(Box::new(solver))
                }
            };
            self.backend = Some(backend);
            self.backend_rho = rho;
        }
        let report = match self.backend.as_mut().expect("backend built above") {
            Backend::Splitting(s) => s.solve(),
            Backend::InteriorPoint(s) => {
                let report = s.solve()?;
                if report.status == Status::Optimal {
                    report
                } else {
                    gridplan_qp::solve(&self.sqp.qp, &settings.solver_settings())?
                }
            }
        };
        self.last = Some(report.clone());
        Ok(report)
    }
}

fn build_workers(problem: &ConsensusProblem) -> Result<Vec<Worker>, AdmmError> {
    problem
        .scenarios
        .par_iter()
        .enumerate()
        .map(|(j, data)| {
            let sqp = assemble_base(data, &problem.system, &problem.policy, problem.map.is_bound(j))
                .map_err(|source| AdmmError::Subproblem { scenario: j, source })?;
            Ok(Worker {
                sqp,
                backend: None,
                backend_rho: 0.0,
                last: None,
            })
        })
        .collect()
}

fn check_problem(problem: &ConsensusProblem, cfg: &AdmmConfig) -> Result<(), AdmmError> {
    cfg.validate()?;
    if problem.scenarios.is_empty() {
        return Err(AdmmError::Setup("no scenarios".into()));
    }
    if problem.map.scenarios() != problem.scenarios.len() {
        return Err(AdmmError::Setup(format!(
            "boundary map covers {} scenarios, problem has {}",
            problem.map.scenarios(),
            problem.scenarios.len()
        )));
    }
    if problem.map.storages != problem.system.storages.len() {
        return Err(AdmmError::Setup(
            "boundary map storage count differs from the system".into(),
        ));
    }
    problem.map.validate().map_err(|e| AdmmError::Setup(e.to_string()))
}

/// Runs consensus ADMM from the default initial state.
pub fn run(problem: &ConsensusProblem, cfg: &AdmmConfig) -> Result<AdmmOutcome, AdmmError> {
    check_problem(problem, cfg)?;
    let state = AdmmState::initial(&problem.system, &problem.map, cfg.rho0);
    run_from(problem, cfg, state)
}

/// Runs consensus ADMM from a given state. A state that already passes the
/// stopping test is returned after one x-update pass and no further
/// iterations, so that the local solutions are reported.
pub fn run_from(problem: &ConsensusProblem, cfg: &AdmmConfig, mut state: AdmmState) -> Result<AdmmOutcome, AdmmError> {
    check_problem(problem, cfg)?;
    if state.map != problem.map || state.x.len() != problem.scenarios.len() {
        return Err(AdmmError::Setup("state does not match the problem layout".into()));
    }
    let nd = problem.system.design_len();
    let bounds = problem.system.design_bounds();
    let mut workers = build_workers(problem)?;
    let mut trace = Vec::new();
    let mut inexact = 0usize;

    let mut conv = convergence(&state, cfg.eps_abs, cfg.eps_rel);
    let mut status = if state.k > 0 && conv.converged() {
        AdmmStatus::Converged
    } else {
        AdmmStatus::MaxIterations
    };

    while status != AdmmStatus::Converged && state.k < cfg.max_iterations {
        // x-update
        let rho = state.rho;
        let tildes: Vec<Vec<f64>> = (0..workers.len()).map(|j| state.z_tilde(j)).collect();
        let reports: Vec<Result<SolveReport, AdmmError>> = workers
            .par_iter_mut()
            .zip(&tildes)
            .zip(&state.v)
            .enumerate()
            .map(|(j, ((w, zt), v))| {
                w.solve(zt, v, rho, &cfg.subqp)
                    .map_err(|source| AdmmError::Subproblem { scenario: j, source })
            })
            .collect();
        for (j, report) in reports.into_iter().enumerate() {
            let report = report?;
            match report.status {
                Status::PrimalInfeasible => return Err(AdmmError::Infeasible { scenario: j }),
                Status::DualInfeasible => return Err(AdmmError::Unbounded { scenario: j }),
                Status::MaxIterations => inexact += 1,
                Status::Optimal => {}
            }
            let idx = workers[j].sqp.directory.consensus_indices();
            state.x[j] = idx.iter().map(|&i| report.x[i]).collect();
        }

        // z-update
        let xd: Vec<&[f64]> = state.x.iter().map(|x| &x[..nd]).collect();
        let vd: Vec<&[f64]> = state.v.iter().map(|v| &v[..nd]).collect();
        let design = z_update_design(&xd, &vd, rho, &bounds);
        let xb: Vec<&[f64]> = state.x.iter().map(|x| &x[nd..]).collect();
        let vb: Vec<&[f64]> = state.v.iter().map(|v| &v[nd..]).collect();
        let boundary = z_update_boundary(&xb, &vb, rho, &state.map)?;
        let previous = std::mem::replace(&mut state.z, GlobalPlan { design, boundary });
        state.z_prev = Some(previous);

        // dual update
        for j in 0..state.x.len() {
            let zt = state.z_tilde(j);
            state.v[j] = dual_update(&state.x[j], &zt, &state.v[j], rho);
        }
        state.k += 1;

        conv = convergence(&state, cfg.eps_abs, cfg.eps_rel);
        state.history.push((conv.primal, conv.dual));
        let objective_estimate = workers
            .iter()
            .map(|w| w.sqp.scenario_cost(&w.last.as_ref().unwrap().x))
            .sum();
        trace.push(TraceRow {
            k: state.k,
            r_p_norm: conv.primal,
            r_d_norm: conv.dual,
            rho,
            objective_estimate,
        });
        if conv.converged() {
            status = AdmmStatus::Converged;
            break;
        }
        if cfg.adaptive_rho && state.k <= cfg.adapt_iterations {
            let (p, d) = match cfg.rho_balance {
                RhoBalance::Absolute => (conv.primal, conv.dual),
                RhoBalance::Normalized => (conv.primal / conv.eps_primal, conv.dual / conv.eps_dual),
            };
            let new_rho = adapt_rho(rho, p, d, cfg.tau, cfg.mu);
            if new_rho != rho {
                rescale_duals(&mut state.v, rho, new_rho, cfg.dual_rescale);
                state.rho = new_rho;
            }
        }
    }

    // Local solutions for reporting; a state that started converged gets one
    // pass so that dispatch is available.
    if workers.iter().any(|w| w.last.is_none()) {
        let rho = state.rho;
        let tildes: Vec<Vec<f64>> = (0..workers.len()).map(|j| state.z_tilde(j)).collect();
        let results: Vec<Result<SolveReport, AdmmError>> = workers
            .par_iter_mut()
            .zip(&tildes)
            .zip(&state.v)
            .enumerate()
            .map(|(j, ((w, zt), v))| {
                w.solve(zt, v, rho, &cfg.subqp)
                    .map_err(|source| AdmmError::Subproblem { scenario: j, source })
            })
            .collect();
        for r in results {
            r?;
        }
    }
    let scenarios: Vec<ScenarioVariables> = workers
        .iter()
        .map(|w| w.sqp.extract(&w.last.as_ref().unwrap().x))
        .collect();
    let objective = workers
        .iter()
        .map(|w| w.sqp.scenario_cost(&w.last.as_ref().unwrap().x))
        .sum();
    Ok(AdmmOutcome {
        plan: state.z.clone(),
        state,
        trace,
        status,
        scenarios,
        objective,
        convergence: conv,
        inexact_solves: inexact,
    })
}

/// Writes the trace as CSV with header `k,r_p_norm,r_d_norm,rho,objective_estimate`.
pub fn write_trace<W: Write>(mut out: W, trace: &[TraceRow]) -> std::io::Result<()> {
    writeln!(out, "k,r_p_norm,r_d_norm,rho,objective_estimate")?;
    for r in trace {
        writeln!(
            out,
            "{},{:.9e},{:.9e},{:.9e},{:.9e}",
            r.k, r.r_p_norm, r.r_d_norm, r.rho, r.objective_estimate
        )?;
    }
    Ok(())
}
