//! Per-scenario x-update as a convex QP.
//!
//! Each scenario minimizes its own operating and amortized investment cost
//! `f^j(x)` plus the consensus penalty `vᵀ(x_c − z̃) + ρ/2 ‖x_c − z̃‖²`, where
//! `x_c` is the consensus part of the local vector (design copies and,
//! when the scenario is bound, the storage states at its two ends).

use gridplan_qp::{solve_ipm, IpmSettings, QpBuilder, QuadraticProgram, Settings, SolveReport, SolverError, Status};
use thiserror::Error;

use crate::model::{
    shortage_threshold, Design, InitialSoc, ModelError, RatioPolicy, ScenarioData, ScenarioVariables, SystemSpec,
};

#[derive(Debug, Error)]
pub enum SubqpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("nonconvex cost: {0}")]
    Nonconvex(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Named variables of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKey {
    /// Design copy `k` in `[S_max; R_max; H_max]` order.
    Design(usize),
    Soc {
        s: usize,
        t: usize,
    },
    Discharge {
        s: usize,
        t: usize,
    },
    Charge {
        s: usize,
        t: usize,
    },
    Diesel {
        h: usize,
        t: usize,
    },
    Shortage(usize),
}

/// Positions of every named variable in the QP vector.
///
/// Layout: design copies, then per storage `S_0..S_T`, then per storage
/// discharge, per storage charge, per diesel output, and shortage, each
/// series in time order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableDirectory {
    pub storages: usize,
    pub renewables: usize,
    pub diesels: usize,
    pub periods: usize,
    /// Whether the boundary states take part in consensus.
    pub bound: bool,
}

impl VariableDirectory {
    pub fn new(system: &SystemSpec, periods: usize, bound: bool) -> Self {
        Self {
            storages: system.storages.len(),
            renewables: system.renewables.len(),
            diesels: system.diesels.len(),
            periods,
            bound,
        }
    }

    pub fn design_len(&self) -> usize {
        self.storages + self.renewables + self.diesels
    }

    fn soc_base(&self) -> usize {
        self.design_len()
    }

    fn discharge_base(&self) -> usize {
        self.soc_base() + self.storages * (self.periods + 1)
    }

    fn charge_base(&self) -> usize {
        self.discharge_base() + self.storages * self.periods
    }

    fn diesel_base(&self) -> usize {
        self.charge_base() + self.storages * self.periods
    }

    fn shortage_base(&self) -> usize {
        self.diesel_base() + self.diesels * self.periods
    }

    pub fn len(&self) -> usize {
        self.shortage_base() + self.periods
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, key: VarKey) -> usize {
        let t_len = self.periods;
        match key {
            VarKey::Design(k) => k,
            VarKey::Soc { s, t } => self.soc_base() + s * (t_len + 1) + t,
            VarKey::Discharge { s, t } => self.discharge_base() + s * t_len + t,
            VarKey::Charge { s, t } => self.charge_base() + s * t_len + t,
            VarKey::Diesel { h, t } => self.diesel_base() + h * t_len + t,
            VarKey::Shortage(t) => self.shortage_base() + t,
        }
    }

    /// Inverse of [`index`](Self::index).
    pub fn key(&self, i: usize) -> Option<VarKey> {
        let t_len = self.periods;
        if i < self.soc_base() {
            Some(VarKey::Design(i))
        } else if i < self.discharge_base() {
            let r = i - self.soc_base();
            Some(VarKey::Soc {
                s: r / (t_len + 1),
                t: r % (t_len + 1),
            })
        } else if i < self.charge_base() {
            let r = i - self.discharge_base();
            Some(VarKey::Discharge {
                s: r / t_len,
                t: r % t_len,
            })
        } else if i < self.diesel_base() {
            let r = i - self.charge_base();
            Some(VarKey::Charge {
                s: r / t_len,
                t: r % t_len,
            })
        } else if i < self.shortage_base() {
            let r = i - self.diesel_base();
            Some(VarKey::Diesel {
                h: r / t_len,
                t: r % t_len,
            })
        } else if i < self.len() {
            Some(VarKey::Shortage(i - self.shortage_base()))
        } else {
            None
        }
    }

    /// Positions of the consensus vector `[x_d; x_b]`, with `x_b = [S₀; S_T]`
    /// present only for bound scenarios.
    pub fn consensus_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.design_len()).collect();
        if self.bound {
            idx.extend((0..self.storages).map(|s| self.index(VarKey::Soc { s, t: 0 })));
            idx.extend((0..self.storages).map(|s| self.index(VarKey::Soc { s, t: self.periods })));
        }
        idx
    }

    pub fn consensus_len(&self) -> usize {
        self.design_len() + if self.bound { 2 * self.storages } else { 0 }
    }

    pub fn extract(&self, x: &[f64]) -> ScenarioVariables {
        let t_len = self.periods;
        let series = |base: usize, count: usize, len: usize| -> Vec<Vec<f64>> {
            (0..count)
                .map(|k| x[base + k * len..base + (k + 1) * len].to_vec())
                .collect()
        };
        let (ns, nr) = (self.storages, self.renewables);
        ScenarioVariables {
            design: Design {
                storage: x[..ns].to_vec(),
                renewable: x[ns..ns + nr].to_vec(),
                diesel: x[ns + nr..self.design_len()].to_vec(),
            },
            soc: series(self.soc_base(), ns, t_len + 1),
            discharge: series(self.discharge_base(), ns, t_len),
            charge: series(self.charge_base(), ns, t_len),
            diesel: series(self.diesel_base(), self.diesels, t_len),
            shortage: x[self.shortage_base()..self.len()].to_vec(),
        }
    }

    pub fn flatten(&self, vars: &ScenarioVariables) -> Vec<f64> {
        let mut x = vars.design.to_vec();
        x.extend(vars.soc.iter().flatten());
        x.extend(vars.discharge.iter().flatten());
        x.extend(vars.charge.iter().flatten());
        x.extend(vars.diesel.iter().flatten());
        x.extend(&vars.shortage);
        x
    }
}

/// Number of constraints of each family in one scenario, counting sign and
/// range conditions whether they are stored as rows or as variable bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintCounts {
    pub dynamics: usize,
    /// `0 ≤ S_t ≤ S_max` for `t = 1..T`.
    pub soc_range: usize,
    /// The same range at `t = 0`.
    pub initial_soc: usize,
    pub power_limit: usize,
    pub diesel_capacity: usize,
    pub ramp: usize,
    pub load_balance: usize,
    pub shortage: usize,
}

impl ConstraintCounts {
    pub fn for_layout(dir: &VariableDirectory) -> Self {
        let (t, s, h) = (dir.periods, dir.storages, dir.diesels);
        Self {
            dynamics: t * s,
            soc_range: 2 * t * s,
            initial_soc: 2 * s,
            power_limit: 2 * t * s,
            diesel_capacity: t * h,
            ramp: 2 * t.saturating_sub(1) * h,
            load_balance: t,
            shortage: t,
        }
    }
}

/// A scenario's QP together with its variable directory.
#[derive(Debug, Clone)]
pub struct ScenarioQp {
    pub qp: QuadraticProgram,
    pub directory: VariableDirectory,
    pub counts: ConstraintCounts,
    /// Linear term and constant of `f^j` alone, before any penalty.
    pub base_linear: Vec<f64>,
    pub base_constant: f64,
    /// Quadratic term of `f^j` alone (upper triangle).
    pub base_quadratic: gridplan_qp::CscMatrix,
}

impl ScenarioQp {
    /// `f^j(x)` without the consensus penalty.
    pub fn scenario_cost(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; x.len()];
        self.base_quadratic.sym_upper_mul_vec(x, &mut px);
        let quad: f64 = x.iter().zip(&px).map(|(a, b)| a * b).sum();
        0.5 * quad + x.iter().zip(&self.base_linear).map(|(a, b)| a * b).sum::<f64>() + self.base_constant
    }

    /// Linear term and constant after adding `vᵀ(x_c − z̃) + ρ/2 ‖x_c − z̃‖²`.
    pub fn penalized_linear(&self, z_tilde: &[f64], v: &[f64], rho: f64) -> (Vec<f64>, f64) {
        let mut linear = self.base_linear.clone();
        let mut constant = self.base_constant;
        for (k, &i) in self.directory.consensus_indices().iter().enumerate() {
            linear[i] += v[k] - rho * z_tilde[k];
            constant += 0.5 * rho * z_tilde[k] * z_tilde[k] - v[k] * z_tilde[k];
        }
        (linear, constant)
    }

    /// Replaces the penalty of the stored QP.
    pub fn set_penalty(&mut self, z_tilde: &[f64], v: &[f64], rho: f64) -> Result<(), SubqpError> {
        let n_c = self.directory.consensus_len();
        if z_tilde.len() != n_c || v.len() != n_c {
            return Err(SubqpError::Dimension(format!(
                "consensus vectors have lengths {} and {}, expected {n_c}",
                z_tilde.len(),
                v.len()
            )));
        }
        if !(rho > 0.0) {
            return Err(SubqpError::Dimension(format!("penalty weight {rho} must be positive")));
        }
        let consensus = self.directory.consensus_indices();
        let n = self.directory.len();
        let mut triplets: Vec<(usize, usize, f64)> = self.base_quadratic.triplets().collect();
        triplets.extend(consensus.iter().map(|&i| (i, i, rho)));
        self.qp.quadratic = gridplan_qp::CscMatrix::from_triplets(n, n, &triplets);
        let (linear, constant) = self.penalized_linear(z_tilde, v, rho);
        self.qp.linear = linear;
        self.qp.constant = constant;
        Ok(())
    }

    pub fn extract(&self, x: &[f64]) -> ScenarioVariables {
        self.directory.extract(x)
    }

    /// Sparse text dump of the assembled QP, preceded by `# var` lines naming
    /// every position.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for i in 0..self.directory.len() {
            out.push_str(&format!("# var {i} {:?}\n", self.directory.key(i).unwrap()));
        }
        out.push_str(&self.qp.to_dump());
        out
    }
}

/// Builds `f^j` and every constraint of one scenario, with no penalty.
///
/// Storage power limits and diesel output limits are linear in the local
/// capacity copies; renewable output is `r_t · dt · R_max` and is not a
/// variable of its own.
pub fn assemble_base(
    data: &ScenarioData,
    system: &SystemSpec,
    policy: &RatioPolicy,
    bound: bool,
) -> Result<ScenarioQp, SubqpError> {
    system.validate()?;
    policy.validate()?;
    data.validate(system)?;
    if let Some(h) = system.diesels.iter().find(|h| h.om_quad.0 < 0.0) {
        return Err(SubqpError::Nonconvex(format!(
            "diesel `{}` has q2 = {}",
            h.id, h.om_quad.0
        )));
    }
    let t_len = data.periods();
    let dt = data.dt;
    let dir = VariableDirectory::new(system, t_len, bound);
    let mut b = QpBuilder::new(dir.len());
    let (ns, nr) = (dir.storages, dir.renewables);
    let tf = t_len as f64;

    for (k, (lo, hi)) in system.design_bounds().into_iter().enumerate() {
        b.set_bounds(k, lo, hi);
    }

    for (s, spec) in system.storages.iter().enumerate() {
        let cap = s;
        b.add_linear(cap, tf * spec.capacity_cost_rate());
        for t in 0..=t_len {
            b.set_bounds(dir.index(VarKey::Soc { s, t }), 0.0, f64::INFINITY);
            b.add_le(&[(dir.index(VarKey::Soc { s, t }), 1.0), (cap, -1.0)], 0.0);
        }
        match &data.initial_soc {
            Some(InitialSoc::Fixed(v)) => {
                let i = dir.index(VarKey::Soc { s, t: 0 });
                b.set_bounds(i, v[s], v[s]);
            }
            Some(InitialSoc::Fraction(f)) => {
                b.add_eq(&[(dir.index(VarKey::Soc { s, t: 0 }), 1.0), (cap, -f[s])], 0.0);
            }
            None => {}
        }
        for t in 0..t_len {
            let soc = dir.index(VarKey::Soc { s, t });
            let next = dir.index(VarKey::Soc { s, t: t + 1 });
            let dis = dir.index(VarKey::Discharge { s, t });
            let chg = dir.index(VarKey::Charge { s, t });
            b.set_bounds(dis, 0.0, f64::INFINITY);
            b.set_bounds(chg, 0.0, f64::INFINITY);
            b.add_linear(dis, spec.om_coeff);
            b.add_linear(chg, spec.om_coeff);
            b.add_eq(
                &[
                    (next, 1.0),
                    (soc, -(1.0 - spec.xi)),
                    (dis, 1.0 / spec.eta),
                    (chg, -spec.eta),
                ],
                0.0,
            );
            b.add_le(&[(dis, 1.0), (cap, -spec.eta * spec.delta * dt)], 0.0);
            b.add_le(&[(chg, 1.0), (cap, -spec.delta * dt)], 0.0);
        }
    }

    for (r, spec) in system.renewables.iter().enumerate() {
        let cap = ns + r;
        let energy: f64 = data.per_unit_gen[r].iter().sum::<f64>() * dt;
        b.add_linear(cap, tf * spec.capacity_cost_rate() + spec.om_coeff * energy);
    }

    for (h, spec) in system.diesels.iter().enumerate() {
        let cap = ns + nr + h;
        b.add_linear(cap, tf * spec.capacity_cost_rate());
        let (q2, q1, q0) = spec.om_quad;
        for t in 0..t_len {
            let out = dir.index(VarKey::Diesel { h, t });
            b.set_bounds(out, 0.0, f64::INFINITY);
            b.add_quadratic(out, out, 2.0 * q2);
            b.add_linear(out, q1);
            b.constant += q0;
            b.add_le(&[(out, 1.0), (cap, -dt)], 0.0);
            if t + 1 < t_len {
                let nxt = dir.index(VarKey::Diesel { h, t: t + 1 });
                if spec.ramp_up.is_finite() {
                    b.add_le(&[(nxt, 1.0), (out, -1.0)], spec.ramp_up);
                }
                if spec.ramp_down.is_finite() {
                    b.add_le(&[(out, 1.0), (nxt, -1.0)], -spec.ramp_down);
                }
            }
        }
    }

    for t in 0..t_len {
        let g = dir.index(VarKey::Shortage(t));
        b.set_bounds(g, f64::NEG_INFINITY, shortage_threshold(policy, data.demand[t]));
        let mut row = vec![(g, 1.0)];
        for r in 0..nr {
            let coeff = data.per_unit_gen[r][t] * dt;
            if coeff != 0.0 {
                row.push((ns + r, coeff));
            }
        }
        for h in 0..dir.diesels {
            row.push((dir.index(VarKey::Diesel { h, t }), 1.0));
        }
        for s in 0..ns {
            row.push((dir.index(VarKey::Discharge { s, t }), 1.0));
            row.push((dir.index(VarKey::Charge { s, t }), -1.0));
        }
        b.add_eq(&row, data.demand[t]);
    }

    let qp = b.build();
    let counts = ConstraintCounts::for_layout(&dir);
    Ok(ScenarioQp {
        base_linear: qp.linear.clone(),
        base_constant: qp.constant,
        base_quadratic: qp.quadratic.clone(),
        qp,
        directory: dir,
        counts,
    })
}

/// Assembles the x-update of one scenario. The scenario takes part in
/// boundary consensus exactly when `z_tilde` carries boundary entries.
pub fn assemble_subproblem(
    data: &ScenarioData,
    system: &SystemSpec,
    policy: &RatioPolicy,
    z_tilde: &[f64],
    v: &[f64],
    rho: f64,
) -> Result<ScenarioQp, SubqpError> {
    let nd = system.design_len();
    let bound = if z_tilde.len() == nd {
        false
    } else if z_tilde.len() == nd + 2 * system.storages.len() {
        true
    } else {
        return Err(SubqpError::Dimension(format!(
            "z̃ has {} entries, expected {nd} or {}",
            z_tilde.len(),
            nd + 2 * system.storages.len()
        )));
    };
    let mut sqp = assemble_base(data, system, policy, bound)?;
    sqp.set_penalty(z_tilde, v, rho)?;
    Ok(sqp)
}

/// Which QP method solves the x-updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QpMethod {
    /// Primal-dual interior point; falls back to operator splitting when it
    /// does not converge, so that infeasibility is still certified.
    #[default]
    InteriorPoint,
    /// Operator splitting (the reference method), warm-started across
    /// iterations.
    OperatorSplitting,
}

/// Inner solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubqpSettings {
    pub method: QpMethod,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Operator-splitting iteration limit.
    pub max_iter: usize,
    /// Interior-point iteration limit.
    pub ipm_max_iter: usize,
}

impl Default for SubqpSettings {
    fn default() -> Self {
        Self {
            method: QpMethod::InteriorPoint,
            tol_abs: 1e-8,
            tol_rel: 1e-8,
            max_iter: 50_000,
            ipm_max_iter: 100,
        }
    }
}

impl SubqpSettings {
    pub fn solver_settings(&self) -> Settings {
        Settings {
            eps_abs: self.tol_abs,
            eps_rel: self.tol_rel,
            max_iter: self.max_iter,
            ..Settings::default()
        }
    }

    pub fn ipm_settings(&self) -> IpmSettings {
        IpmSettings {
            eps_abs: self.tol_abs,
            eps_rel: self.tol_rel,
            max_iter: self.ipm_max_iter,
            ..IpmSettings::default()
        }
    }
}

/// Solves with the configured method. An interior-point run that does not
/// reach the tolerances is repeated with operator splitting.
pub fn solve(qp: &QuadraticProgram, settings: &SubqpSettings) -> Result<SolveReport, SubqpError> {
    if settings.method == QpMethod::InteriorPoint {
        let report = solve_ipm(qp, &settings.ipm_settings())?;
        if report.status == Status::Optimal {
            return Ok(report);
        }
    }
    Ok(gridplan_qp::solve(qp, &settings.solver_settings())?)
}

pub fn complementarity_audit(report: &SolveReport, directory: &VariableDirectory) -> f64 {
    paired_flows(&report.x, directory)
        .map(|(d, c)| d.min(c).max(0.0))
        .fold(0.0, f64::max)
}

/// Largest `min(P⁺, P⁻) / max(1, P⁺ + P⁻)`.
pub fn complementarity_scaled(x: &[f64], directory: &VariableDirectory) -> f64 {
    paired_flows(x, directory)
        .map(|(d, c)| d.min(c).max(0.0) / (d + c).max(1.0))
        .fold(0.0, f64::max)
}

fn paired_flows<'a>(x: &'a [f64], dir: &'a VariableDirectory) -> impl Iterator<Item = (f64, f64)> + 'a {
    (0..dir.storages).flat_map(move |s| {
        (0..dir.periods).map(move |t| {
            (
                x[dir.index(VarKey::Discharge { s, t })],
                x[dir.index(VarKey::Charge { s, t })],
            )
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComplementarityVerdict {
    Holds {
        scaled: f64,
    },
    Violated {
        scaled: f64,
    },
    /// Some storage has zero throughput cost, so simultaneous charging and
    /// discharging may be optimal; reported but not an error.
    Unchecked {
        scaled: f64,
    },
}

pub fn complementarity_verdict(
    x: &[f64],
    directory: &VariableDirectory,
    system: &SystemSpec,
    tol: f64,
) -> ComplementarityVerdict {
    let scaled = complementarity_scaled(x, directory);
    if system.storages.iter().any(|s| s.om_coeff <= 0.0) {
        ComplementarityVerdict::Unchecked { scaled }
    } else if scaled <= tol {
        ComplementarityVerdict::Holds { scaled }
    } else {
        ComplementarityVerdict::Violated { scaled }
    }
}
