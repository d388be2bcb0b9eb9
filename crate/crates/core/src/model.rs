//! Physical and economic model of a hybrid storage/generation system.
//!
//! All energies are in MWh per period, capacities of storage in MWh and of
//! generators in MW, costs in currency units. Every function here is pure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid {what} `{id}`: {reason}")]
    InvalidSpec {
        what: &'static str,
        id: String,
        reason: String,
    },
    #[error("negative input: {0}")]
    NegativeInput(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty series: {0}")]
    EmptySeries(&'static str),
    #[error("invalid ratio policy: {0}")]
    InvalidPolicy(String),
}

/// One-way efficiency from a round-trip efficiency, split evenly between legs.
pub fn one_way_efficiency(round_trip: f64) -> f64 {
    round_trip.sqrt()
}

/// Power/energy ratio `δ` of a device that fills up in `full_charge_hours`.
pub fn power_ratio(full_charge_hours: f64) -> f64 {
    1.0 / full_charge_hours
}

/// Straight-line share of an investment charged to one period of `dt_hours`.
pub fn amortization(dt_hours: f64, life_years: f64) -> f64 {
    dt_hours / (life_years * HOURS_PER_YEAR)
}

fn invalid(what: &'static str, id: &str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidSpec {
        what,
        id: id.to_string(),
        reason: reason.into(),
    }
}

fn check_bounds(what: &'static str, id: &str, min: f64, max: f64) -> Result<(), ModelError> {
    if !(min >= 0.0 && min <= max) || min.is_nan() || max.is_nan() {
        return Err(invalid(
            what,
            id,
            format!("capacity bounds [{min}, {max}] are not ordered and non-negative"),
        ));
    }
    Ok(())
}

fn check_costs(what: &'static str, id: &str, costs: &[f64]) -> Result<(), ModelError> {
    if costs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
        return Err(invalid(what, id, "costs must be finite and non-negative"));
    }
    Ok(())
}

/// One energy-storage technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageSpec {
    pub id: String,
    /// One-way efficiency.
    pub eta: f64,
    /// Rated power over rated energy, 1/hour.
    pub delta: f64,
    /// Fraction of the stored energy lost every period.
    pub xi: f64,
    /// Investment cost per MWh of capacity.
    pub inv_cost: f64,
    /// Share of the investment charged to each period.
    pub amort: f64,
    /// O/M cost per MWh charged or discharged.
    pub om_coeff: f64,
    pub cap_min: f64,
    pub cap_max: f64,
}

impl StorageSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let id = &self.id;
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid(
                "storage",
                id,
                format!("efficiency {} outside (0, 1]", self.eta),
            ));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("storage", id, "power/energy ratio must be positive"));
        }
        if !(self.xi >= 0.0 && self.xi < 1.0) {
            return Err(invalid("storage", id, format!("loss ratio {} outside [0, 1)", self.xi)));
        }
        check_costs("storage", id, &[self.inv_cost, self.amort, self.om_coeff])?;
        check_bounds("storage", id, self.cap_min, self.cap_max)
    }

    /// Amortized investment charged per period per MWh of capacity.
    pub fn capacity_cost_rate(&self) -> f64 {
        self.amort * self.inv_cost
    }
}

/// One dispatchable (diesel) generator type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DieselSpec {
    pub id: String,
    pub inv_cost: f64,
    pub amort: f64,
    /// `(q2, q1, q0)` of the per-period O/M cost `q2 H² + q1 H + q0`.
    pub om_quad: (f64, f64, f64),
    /// Largest increase of output between consecutive periods; infinite
    /// when unconstrained.
    pub ramp_up: f64,
    /// Largest decrease, as a non-positive number (or `-∞`).
    pub ramp_down: f64,
    pub cap_min: f64,
    pub cap_max: f64,
}

impl DieselSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let id = &self.id;
        if !(self.ramp_down <= 0.0 && self.ramp_up >= 0.0) {
            return Err(invalid(
                "diesel",
                id,
                "ramp limits must satisfy ramp_down ≤ 0 ≤ ramp_up",
            ));
        }
        if !(self.om_quad.0 >= 0.0) {
            return Err(invalid("diesel", id, "quadratic O/M coefficient must be non-negative"));
        }
        if !(self.om_quad.1.is_finite() && self.om_quad.2.is_finite()) {
            return Err(invalid("diesel", id, "O/M coefficients must be finite"));
        }
        check_costs("diesel", id, &[self.inv_cost, self.amort])?;
        check_bounds("diesel", id, self.cap_min, self.cap_max)
    }

    pub fn capacity_cost_rate(&self) -> f64 {
        self.amort * self.inv_cost
    }

    pub fn om_cost(&self, output: f64) -> f64 {
        let (q2, q1, q0) = self.om_quad;
        q2 * output * output + q1 * output + q0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenewableKind {
    Solar,
    Wind,
}

/// One non-dispatchable generator type; output is `per_unit · capacity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewableSpec {
    pub id: String,
    pub kind: RenewableKind,
    pub inv_cost: f64,
    pub amort: f64,
    /// O/M cost per MWh generated.
    pub om_coeff: f64,
    pub cap_min: f64,
    pub cap_max: f64,
}

impl RenewableSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_costs("renewable", &self.id, &[self.inv_cost, self.amort, self.om_coeff])?;
        check_bounds("renewable", &self.id, self.cap_min, self.cap_max)
    }

    pub fn capacity_cost_rate(&self) -> f64 {
        self.amort * self.inv_cost
    }
}

/// The full technology portfolio.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemSpec {
    pub storages: Vec<StorageSpec>,
    pub renewables: Vec<RenewableSpec>,
    pub diesels: Vec<DieselSpec>,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.storages.iter().try_for_each(StorageSpec::validate)?;
        self.renewables.iter().try_for_each(RenewableSpec::validate)?;
        self.diesels.iter().try_for_each(DieselSpec::validate)
    }

    /// Number of design parameters `|S| + |R| + |H|`.
    pub fn design_len(&self) -> usize {
        self.storages.len() + self.renewables.len() + self.diesels.len()
    }

    /// Capacity boxes in design-vector order.
    pub fn design_bounds(&self) -> Vec<(f64, f64)> {
        self.storages
            .iter()
            .map(|s| (s.cap_min, s.cap_max))
            .chain(self.renewables.iter().map(|r| (r.cap_min, r.cap_max)))
            .chain(self.diesels.iter().map(|h| (h.cap_min, h.cap_max)))
            .collect()
    }

    /// Design labels in design-vector order.
    pub fn design_labels(&self) -> Vec<&str> {
        self.storages
            .iter()
            .map(|s| s.id.as_str())
            .chain(self.renewables.iter().map(|r| r.id.as_str()))
            .chain(self.diesels.iter().map(|h| h.id.as_str()))
            .collect()
    }

    /// Installs `r_DC · max(D)` as the upper capacity of every diesel generator
    /// (lower bounds above it are pulled down to match).
    pub fn with_diesel_cap_from_ratio(mut self, policy: &RatioPolicy, demand: &[f64]) -> Result<Self, ModelError> {
        let cap = diesel_cap_from_ratio(policy, demand)?;
        for h in &mut self.diesels {
            h.cap_max = cap;
            h.cap_min = h.cap_min.min(cap);
        }
        Ok(self)
    }
}

/// How the shortage threshold `G_th` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum ThresholdRule {
    /// `G_th = r_SD · D_t`
    #[default]
    Proportional,
    /// A fixed threshold in MWh per period.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPolicy {
    /// Shortfall-to-demand ratio.
    pub r_sd: f64,
    /// Diesel capacity ratio (to peak demand).
    pub r_dc: f64,
    #[serde(default)]
    pub threshold: ThresholdRule,
}

impl RatioPolicy {
    pub fn new(r_sd: f64, r_dc: f64) -> Self {
        Self {
            r_sd,
            r_dc,
            threshold: ThresholdRule::Proportional,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.r_sd >= 0.0) || !(self.r_dc >= 0.0) {
            return Err(ModelError::InvalidPolicy(format!(
                "ratios must be non-negative (r_sd = {}, r_dc = {})",
                self.r_sd, self.r_dc
            )));
        }
        Ok(())
    }
}

/// One sub-horizon of demand and per-unit renewable availability.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioData {
    pub index: usize,
    /// Demand per period, MWh.
    pub demand: Vec<f64>,
    /// `per_unit_gen[r][t]`: generation per MW installed, per hour.
    pub per_unit_gen: Vec<Vec<f64>>,
    /// Period length in hours.
    pub dt: f64,
    /// Prescribed initial state of charge; `None` leaves it free.
    pub initial_soc: Option<InitialSoc>,
}

/// A prescribed initial state of charge, one entry per storage.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSoc {
    /// Absolute levels in MWh.
    Fixed(Vec<f64>),
    /// Fractions of the (local) installed capacity, in `[0, 1]`.
    Fraction(Vec<f64>),
}

impl InitialSoc {
    pub fn values(&self) -> &[f64] {
        match self {
            InitialSoc::Fixed(v) | InitialSoc::Fraction(v) => v,
        }
    }

    /// Required `S₀` for storage `s` given its capacity.
    pub fn level(&self, s: usize, capacity: f64) -> f64 {
        match self {
            InitialSoc::Fixed(v) => v[s],
            InitialSoc::Fraction(f) => f[s] * capacity,
        }
    }
}

impl ScenarioData {
    pub fn periods(&self) -> usize {
        self.demand.len()
    }

    pub fn validate(&self, system: &SystemSpec) -> Result<(), ModelError> {
        let t = self.periods();
        if t == 0 {
            return Err(ModelError::EmptySeries("scenario demand"));
        }
        if self.per_unit_gen.len() != system.renewables.len() {
            return Err(ModelError::Dimension(format!(
                "scenario {} has {} renewable series for {} renewable types",
                self.index,
                self.per_unit_gen.len(),
                system.renewables.len()
            )));
        }
        if self.per_unit_gen.iter().any(|s| s.len() != t) {
            return Err(ModelError::Dimension(format!(
                "scenario {} series lengths differ",
                self.index
            )));
        }
        if self.demand.iter().any(|d| !(*d >= 0.0)) {
            return Err(ModelError::NegativeInput("demand"));
        }
        if self.per_unit_gen.iter().flatten().any(|r| !(*r >= 0.0)) {
            return Err(ModelError::NegativeInput("per-unit generation"));
        }
        if !(self.dt > 0.0) {
            return Err(ModelError::Dimension(format!(
                "period length {} must be positive",
                self.dt
            )));
        }
        if let Some(init) = &self.initial_soc {
            let values = init.values();
            if values.len() != system.storages.len() {
                return Err(ModelError::Dimension("initial state of charge per storage".into()));
            }
            if values.iter().any(|s| !(*s >= 0.0)) {
                return Err(ModelError::NegativeInput("initial state of charge"));
            }
            if matches!(init, InitialSoc::Fraction(_)) && values.iter().any(|f| *f > 1.0) {
                return Err(ModelError::Dimension("initial state-of-charge fraction above 1".into()));
            }
        }
        Ok(())
    }
}

/// Capacities in design-vector order `[S_max; R_max; H_max]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Design {
    pub storage: Vec<f64>,
    pub renewable: Vec<f64>,
    pub diesel: Vec<f64>,
}

impl Design {
    pub fn zeros(system: &SystemSpec) -> Self {
        Self {
            storage: vec![0.0; system.storages.len()],
            renewable: vec![0.0; system.renewables.len()],
            diesel: vec![0.0; system.diesels.len()],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.storage
            .iter()
            .chain(&self.renewable)
            .chain(&self.diesel)
            .copied()
            .collect()
    }

    pub fn from_slice(system: &SystemSpec, v: &[f64]) -> Self {
        let (ns, nr) = (system.storages.len(), system.renewables.len());
        Self {
            storage: v[..ns].to_vec(),
            renewable: v[ns..ns + nr].to_vec(),
            diesel: v[ns + nr..ns + nr + system.diesels.len()].to_vec(),
        }
    }
}

/// Local decision vector of one scenario.
///
/// Per-storage series are indexed `[s][t]`; `soc[s]` has `T + 1` entries
/// whose first and last elements are the boundary states `S₀`, `S_T`.
/// The consensus part is `x = [x_d; x_b]` with `x_d = [S_max; R_max; H_max]`
/// and `x_b = [S₀; S_T]`, each block in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioVariables {
    pub design: Design,
    pub charge: Vec<Vec<f64>>,
    pub discharge: Vec<Vec<f64>>,
    pub soc: Vec<Vec<f64>>,
    pub diesel: Vec<Vec<f64>>,
    /// Signed shortage; negative values are surplus (dumped or exported).
    pub shortage: Vec<f64>,
}

impl ScenarioVariables {
    pub fn zeros(system: &SystemSpec, periods: usize) -> Self {
        let ns = system.storages.len();
        Self {
            design: Design::zeros(system),
            charge: vec![vec![0.0; periods]; ns],
            discharge: vec![vec![0.0; periods]; ns],
            soc: vec![vec![0.0; periods + 1]; ns],
            diesel: vec![vec![0.0; periods]; system.diesels.len()],
            shortage: vec![0.0; periods],
        }
    }

    pub fn periods(&self) -> usize {
        self.shortage.len()
    }

    pub fn initial_soc(&self) -> Vec<f64> {
        self.soc.iter().map(|s| s[0]).collect()
    }

    pub fn final_soc(&self) -> Vec<f64> {
        self.soc.iter().map(|s| *s.last().unwrap()).collect()
    }

    /// `[S₀; S_T]`
    pub fn boundary(&self) -> Vec<f64> {
        let mut b = self.initial_soc();
        b.extend(self.final_soc());
        b
    }

    /// `[x_d; x_b]`
    pub fn consensus_vector(&self) -> Vec<f64> {
        let mut v = self.design.to_vec();
        v.extend(self.boundary());
        v
    }

    fn check_dims(&self, system: &SystemSpec, periods: usize) -> Result<(), ModelError> {
        let ns = system.storages.len();
        let ok = self.shortage.len() == periods
            && self.charge.len() == ns
            && self.discharge.len() == ns
            && self.soc.len() == ns
            && self.diesel.len() == system.diesels.len()
            && self.charge.iter().all(|s| s.len() == periods)
            && self.discharge.iter().all(|s| s.len() == periods)
            && self.soc.iter().all(|s| s.len() == periods + 1)
            && self.diesel.iter().all(|s| s.len() == periods)
            && self.design.storage.len() == ns
            && self.design.renewable.len() == system.renewables.len()
            && self.design.diesel.len() == system.diesels.len();
        if ok {
            Ok(())
        } else {
            Err(ModelError::Dimension(format!(
                "scenario variables do not match {periods} periods and the system layout"
            )))
        }
    }
}

/// Global consensus vector `z = [z_d; z_b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPlan {
    pub design: Vec<f64>,
    pub boundary: Vec<f64>,
}

impl GlobalPlan {
    pub fn to_vec(&self) -> Vec<f64> {
        self.design.iter().chain(&self.boundary).copied().collect()
    }

    pub fn design(&self, system: &SystemSpec) -> Design {
        Design::from_slice(system, &self.design)
    }
}

/// Next-period stored energy `S − P⁺/η + η P⁻ − ξ S`, without clipping.
pub fn storage_step(soc: f64, discharge: f64, charge: f64, spec: &StorageSpec) -> Result<f64, ModelError> {
    if soc < 0.0 {
        return Err(ModelError::NegativeInput("state of charge"));
    }
    if discharge < 0.0 {
        return Err(ModelError::NegativeInput("discharge"));
    }
    if charge < 0.0 {
        return Err(ModelError::NegativeInput("charge"));
    }
    Ok(soc - discharge / spec.eta + spec.eta * charge - spec.xi * soc)
}

/// Per-period energy limits `(η δ S_max dt, δ S_max dt)` for discharge and charge.
pub fn storage_power_limits(spec: &StorageSpec, s_max: f64, dt: f64) -> (f64, f64) {
    (spec.eta * spec.delta * s_max * dt, spec.delta * s_max * dt)
}

/// Total system cost in period `t`: amortized investment plus O/M of every
/// technology. Renewable output is `r_t · R_max · dt`.
pub fn period_cost(vars: &ScenarioVariables, data: &ScenarioData, t: usize, system: &SystemSpec) -> f64 {
    let mut cost = 0.0;
    for (s, spec) in system.storages.iter().enumerate() {
        cost += spec.capacity_cost_rate() * vars.design.storage[s]
            + spec.om_coeff * (vars.discharge[s][t] + vars.charge[s][t]);
    }
    for (r, spec) in system.renewables.iter().enumerate() {
        let cap = vars.design.renewable[r];
        cost += spec.capacity_cost_rate() * cap + spec.om_coeff * data.per_unit_gen[r][t] * cap * data.dt;
    }
    for (h, spec) in system.diesels.iter().enumerate() {
        cost += spec.capacity_cost_rate() * vars.design.diesel[h] + spec.om_cost(vars.diesel[h][t]);
    }
    cost
}

/// `Σ_t` [`period_cost`] over a scenario.
pub fn scenario_cost(vars: &ScenarioVariables, data: &ScenarioData, system: &SystemSpec) -> f64 {
    (0..data.periods()).map(|t| period_cost(vars, data, t, system)).sum()
}

/// Renewable energy delivered in period `t`, MWh.
pub fn renewable_output(vars: &ScenarioVariables, data: &ScenarioData, t: usize) -> f64 {
    vars.design
        .renewable
        .iter()
        .zip(&data.per_unit_gen)
        .map(|(cap, r)| r[t] * cap * data.dt)
        .sum()
}

/// `D_t − Σ R_t − Σ H_t − Σ (P⁺ − P⁻) − G_t`; zero when supply meets demand.
pub fn load_balance_residual(vars: &ScenarioVariables, data: &ScenarioData, t: usize) -> f64 {
    let diesel: f64 = vars.diesel.iter().map(|h| h[t]).sum();
    let storage: f64 = vars.discharge.iter().zip(&vars.charge).map(|(d, c)| d[t] - c[t]).sum();
    data.demand[t] - renewable_output(vars, data, t) - diesel - storage - vars.shortage[t]
}

/// Right-hand side of the shortage constraint `G_t ≤ G_th`.
pub fn shortage_threshold(policy: &RatioPolicy, demand_t: f64) -> f64 {
    match policy.threshold {
        ThresholdRule::Proportional => policy.r_sd * demand_t,
        ThresholdRule::Constant(v) => v,
    }
}

/// `r_DC · max(D_t)`.
pub fn diesel_cap_from_ratio(policy: &RatioPolicy, demand: &[f64]) -> Result<f64, ModelError> {
    let peak = demand
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(ModelError::EmptySeries("demand"))?;
    Ok(policy.r_dc * peak)
}

/// Constraint families audited by [`check_feasible`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintFamily {
    /// Stored-energy dynamics.
    StorageDynamics,
    /// `0 ≤ S_t ≤ S_max`.
    StorageRange,
    /// Charge/discharge power limits.
    StoragePower,
    /// `P± ≥ 0`, `H ≥ 0`.
    Sign,
    /// `0 ≤ H_t ≤ H_max`.
    DieselCapacity,
    DieselRamp,
    LoadBalance,
    Shortage,
    CapacityBounds,
    /// Fixed initial state of charge, when the scenario prescribes one.
    InitialState,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 10] = [
        ConstraintFamily::StorageDynamics,
        ConstraintFamily::StorageRange,
        ConstraintFamily::StoragePower,
        ConstraintFamily::Sign,
        ConstraintFamily::DieselCapacity,
        ConstraintFamily::DieselRamp,
        ConstraintFamily::LoadBalance,
        ConstraintFamily::Shortage,
        ConstraintFamily::CapacityBounds,
        ConstraintFamily::InitialState,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstraintFamily::StorageDynamics => "storage-dynamics",
            ConstraintFamily::StorageRange => "storage-range",
            ConstraintFamily::StoragePower => "storage-power",
            ConstraintFamily::Sign => "sign",
            ConstraintFamily::DieselCapacity => "diesel-capacity",
            ConstraintFamily::DieselRamp => "diesel-ramp",
            ConstraintFamily::LoadBalance => "load-balance",
            ConstraintFamily::Shortage => "shortage",
            ConstraintFamily::CapacityBounds => "capacity-bounds",
            ConstraintFamily::InitialState => "initial-state",
        }
    }
}

/// Worst violation of one constraint family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyViolation {
    pub family: ConstraintFamily,
    /// Largest absolute violation.
    pub absolute: f64,
    /// Largest violation divided by `max(1, magnitude of the row's terms)`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub families: Vec<FamilyViolation>,
    pub tol: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.families.iter().all(|f| f.scaled <= self.tol)
    }

    pub fn get(&self, family: ConstraintFamily) -> FamilyViolation {
        self.families
            .iter()
            .copied()
            .find(|f| f.family == family)
            .unwrap_or(FamilyViolation {
                family,
                absolute: 0.0,
                scaled: 0.0,
            })
    }

    /// Families whose scaled violation exceeds the tolerance.
    pub fn violated(&self) -> Vec<ConstraintFamily> {
        self.families
            .iter()
            .filter(|f| f.scaled > self.tol)
            .map(|f| f.family)
            .collect()
    }
}

struct Audit {
    worst: Vec<FamilyViolation>,
}

impl Audit {
    fn new() -> Self {
        Self {
            worst: ConstraintFamily::ALL
                .iter()
                .map(|&family| FamilyViolation {
                    family,
                    absolute: 0.0,
                    scaled: 0.0,
                })
                .collect(),
        }
    }

    /// Records a violation amount (≤ 0 means satisfied) with the magnitudes
    /// of the terms that make up the row.
    fn record(&mut self, family: ConstraintFamily, violation: f64, terms: &[f64]) {
        let v = violation.max(0.0);
        if v == 0.0 {
            return;
        }
        let scale = terms.iter().fold(1.0_f64, |m, t| m.max(t.abs()));
        let entry = self.worst.iter_mut().find(|f| f.family == family).unwrap();
        entry.absolute = entry.absolute.max(v);
        entry.scaled = entry.scaled.max(v / scale);
    }
}

/// Evaluates every constraint of the planning problem at a scenario point.
pub fn check_feasible(
    vars: &ScenarioVariables,
    data: &ScenarioData,
    system: &SystemSpec,
    policy: &RatioPolicy,
    tol: f64,
) -> Result<FeasibilityReport, ModelError> {
    use ConstraintFamily::*;
    let periods = data.periods();
    vars.check_dims(system, periods)?;
    if data.per_unit_gen.len() != system.renewables.len() {
        return Err(ModelError::Dimension("renewable series count".into()));
    }
    let dt = data.dt;
    let mut audit = Audit::new();

    for (s, spec) in system.storages.iter().enumerate() {
        let cap = vars.design.storage[s];
        let soc = &vars.soc[s];
        let (p_plus_max, p_minus_max) = storage_power_limits(spec, cap, dt);
        for t in 0..periods {
            let (dis, chg) = (vars.discharge[s][t], vars.charge[s][t]);
            let next = soc[t] - dis / spec.eta + spec.eta * chg - spec.xi * soc[t];
            audit.record(
                StorageDynamics,
                (soc[t + 1] - next).abs(),
                &[soc[t + 1], soc[t], dis / spec.eta, chg],
            );
            audit.record(Sign, -dis, &[dis]);
            audit.record(Sign, -chg, &[chg]);
            audit.record(StoragePower, dis - p_plus_max, &[dis, p_plus_max]);
            audit.record(StoragePower, chg - p_minus_max, &[chg, p_minus_max]);
        }
        for &level in soc {
            audit.record(StorageRange, -level, &[level]);
            audit.record(StorageRange, level - cap, &[level, cap]);
        }
        if let Some(init) = &data.initial_soc {
            let level = init.level(s, cap);
            audit.record(InitialState, (soc[0] - level).abs(), &[soc[0], level]);
        }
        audit.record(CapacityBounds, spec.cap_min - cap, &[cap, spec.cap_min]);
        audit.record(CapacityBounds, cap - spec.cap_max, &[cap, spec.cap_max]);
    }

    for (r, spec) in system.renewables.iter().enumerate() {
        let cap = vars.design.renewable[r];
        audit.record(CapacityBounds, spec.cap_min - cap, &[cap, spec.cap_min]);
        audit.record(CapacityBounds, cap - spec.cap_max, &[cap, spec.cap_max]);
    }

    for (h, spec) in system.diesels.iter().enumerate() {
        let cap = vars.design.diesel[h];
        let out = &vars.diesel[h];
        for t in 0..periods {
            audit.record(Sign, -out[t], &[out[t]]);
            audit.record(DieselCapacity, out[t] - cap * dt, &[out[t], cap * dt]);
            if t + 1 < periods {
                let step = out[t + 1] - out[t];
                let terms = [out[t + 1], out[t]];
                audit.record(DieselRamp, step - spec.ramp_up, &terms);
                audit.record(DieselRamp, spec.ramp_down - step, &terms);
            }
        }
        audit.record(CapacityBounds, spec.cap_min - cap, &[cap, spec.cap_min]);
        audit.record(CapacityBounds, cap - spec.cap_max, &[cap, spec.cap_max]);
    }

    for t in 0..periods {
        let residual = load_balance_residual(vars, data, t);
        let mut terms = vec![data.demand[t], renewable_output(vars, data, t), vars.shortage[t]];
        terms.extend(vars.diesel.iter().map(|h| h[t]));
        terms.extend(vars.discharge.iter().map(|d| d[t]));
        terms.extend(vars.charge.iter().map(|c| c[t]));
        audit.record(LoadBalance, residual.abs(), &terms);
        let threshold = shortage_threshold(policy, data.demand[t]);
        audit.record(Shortage, vars.shortage[t] - threshold, &[vars.shortage[t], threshold]);
    }

    Ok(FeasibilityReport {
        families: audit.worst,
        tol,
    })
}
