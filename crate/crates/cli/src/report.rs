//! Report accounting and CSV output.

use std::fmt::Write as _;

use gridplan::consensus::{write_trace, AdmmOutcome, AdmmStatus};
use gridplan::model::{ScenarioData, SystemSpec};

use crate::config::MILLION;

/// Cost and size of one technology over the whole design horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub id: String,
    pub capacity: f64,
    /// Currency units (not millions).
    pub investment: f64,
    pub om: f64,
}

impl CapacityRow {
    pub fn total(&self) -> f64 {
        self.investment + self.om
    }
}

/// Energy accounting over all scenarios, MWh.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBalance {
    pub demand: f64,
    /// Demand minus positive shortage.
    pub served: f64,
    pub shortage: f64,
    /// Surplus dumped or exported (negative shortage).
    pub dumped: f64,
    pub diesel: f64,
    pub renewable_generated: f64,
}

impl EnergyBalance {
    /// Share of served demand not supplied by diesel.
    pub fn renewable_fraction(&self) -> f64 {
        if self.served > 0.0 {
            1.0 - self.diesel / self.served
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub rows: Vec<CapacityRow>,
    pub energy: EnergyBalance,
    pub status: AdmmStatus,
    pub iterations: usize,
    pub final_rho: f64,
    /// Sum of scenario objectives at the local solutions, currency units.
    pub objective: f64,
    pub periods: usize,
    pub scenarios: usize,
    /// `(scenario, t, G_t)`
    pub shortage: Vec<(usize, usize, f64)>,
}

impl PlanReport {
    pub fn total_cost(&self) -> f64 {
        self.rows.iter().map(CapacityRow::total).sum()
    }

    pub fn investment(&self) -> f64 {
        self.rows.iter().map(|r| r.investment).sum()
    }

    pub fn om(&self) -> f64 {
        self.rows.iter().map(|r| r.om).sum()
    }

    pub fn capacity(&self, id: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.id == id).map(|r| r.capacity)
    }

    /// Capacities are the consensus design; operating costs come from each
    /// scenario's own dispatch. Investment is charged for every period of
    /// the horizon covered by the scenarios.
    pub fn build(outcome: &AdmmOutcome, data: &[ScenarioData], system: &SystemSpec) -> Self {
        let design = outcome.plan.design(system);
        let periods: usize = data.iter().map(ScenarioData::periods).sum();
        let pf = periods as f64;
        let mut rows = Vec::new();

        for (s, spec) in system.storages.iter().enumerate() {
            let throughput: f64 = outcome
                .scenarios
                .iter()
                .map(|v| v.discharge[s].iter().chain(&v.charge[s]).sum::<f64>())
                .sum();
            rows.push(CapacityRow {
                id: spec.id.clone(),
                capacity: design.storage[s],
                investment: spec.capacity_cost_rate() * design.storage[s] * pf,
                om: spec.om_coeff * throughput,
            });
        }
        for (r, spec) in system.renewables.iter().enumerate() {
            let per_unit: f64 = data.iter().map(|d| d.per_unit_gen[r].iter().sum::<f64>() * d.dt).sum();
            rows.push(CapacityRow {
                id: spec.id.clone(),
                capacity: design.renewable[r],
                investment: spec.capacity_cost_rate() * design.renewable[r] * pf,
                om: spec.om_coeff * per_unit * design.renewable[r],
            });
        }
        for (h, spec) in system.diesels.iter().enumerate() {
            let om: f64 = outcome
                .scenarios
                .iter()
                .map(|v| v.diesel[h].iter().map(|&x| spec.om_cost(x)).sum::<f64>())
                .sum();
            rows.push(CapacityRow {
                id: spec.id.clone(),
                capacity: design.diesel[h],
                investment: spec.capacity_cost_rate() * design.diesel[h] * pf,
                om,
            });
        }

        let mut energy = EnergyBalance::default();
        let mut shortage = Vec::new();
        for (j, (d, v)) in data.iter().zip(&outcome.scenarios).enumerate() {
            for t in 0..d.periods() {
                let g = v.shortage[t];
                energy.demand += d.demand[t];
                energy.shortage += g.max(0.0);
                energy.dumped += (-g).max(0.0);
                energy.diesel += v.diesel.iter().map(|h| h[t]).sum::<f64>();
                energy.renewable_generated += (0..system.renewables.len())
                    .map(|r| d.per_unit_gen[r][t] * design.renewable[r] * d.dt)
                    .sum::<f64>();
                shortage.push((j, t, g));
            }
        }
        energy.served = energy.demand - energy.shortage;

        Self {
            rows,
            energy,
            status: outcome.status,
            iterations: outcome.state.k,
            final_rho: outcome.state.rho,
            objective: outcome.objective,
            periods,
            scenarios: data.len(),
            shortage,
        }
    }

    pub fn capacities_csv(&self) -> String {
        let mut out = String::from("type,planned_capacity,investment_cost,om_cost,total_cost\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{:.4},{:.4}",
                r.id,
                r.capacity,
                r.investment / MILLION,
                r.om / MILLION,
                r.total() / MILLION
            );
        }
        let _ = writeln!(
            out,
            "Total,,{:.4},{:.4},{:.4}",
            self.investment() / MILLION,
            self.om() / MILLION,
            self.total_cost() / MILLION
        );
        out
    }

    pub fn summary_csv(&self) -> String {
        let e = &self.energy;
        let status = status_label(self.status);
        let mut out = String::from("metric,value\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k},{v}");
        };
        row("status", status.to_string());
        row("iterations", self.iterations.to_string());
        row("final_rho", format!("{:.6e}", self.final_rho));
        row("scenarios", self.scenarios.to_string());
        row("periods", self.periods.to_string());
        row("total_cost_musd", format!("{:.4}", self.total_cost() / MILLION));
        row("objective_musd", format!("{:.4}", self.objective / MILLION));
        row("demand_mwh", format!("{:.4}", e.demand));
        row("served_mwh", format!("{:.4}", e.served));
        row("shortage_mwh", format!("{:.4}", e.shortage));
        row("dumped_mwh", format!("{:.4}", e.dumped));
        row("diesel_mwh", format!("{:.4}", e.diesel));
        row("renewable_generated_mwh", format!("{:.4}", e.renewable_generated));
        row("renewable_fraction", format!("{:.6}", e.renewable_fraction()));
        out
    }

    pub fn shortage_csv(&self) -> String {
        let mut out = String::from("scenario,t,shortage_mwh\n");
        for (j, t, g) in &self.shortage {
            let _ = writeln!(out, "{j},{t},{g:.6}");
        }
        out
    }
}

pub fn status_label(status: AdmmStatus) -> &'static str {
    match status {
        AdmmStatus::Converged => "converged",
        AdmmStatus::MaxIterations => "max-iterations",
    }
}

pub fn trace_csv(outcome: &AdmmOutcome) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, &outcome.trace).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}
