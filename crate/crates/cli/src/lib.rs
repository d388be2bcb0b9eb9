//! Planning studies on top of the `gridplan` library: single plans, diesel
//! ratio sweeps and site comparisons, all written as CSV.

pub mod config;
pub mod report;
pub mod synthetic;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gridplan::chance::{build_iid_scenarios, required_scenario_count, ChanceConfig};
use gridplan::consensus::{run, AdmmError, AdmmOutcome, AdmmStatus, ConsensusProblem};
use gridplan::ingest::{load_horizon, partition, DatasetManifest};
use gridplan::model::SystemSpec;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{Mode, RunConfig};
pub use report::PlanReport;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("input data: {0}")]
    Data(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => 2,
            _ => 1,
        }
    }
}

impl From<AdmmError> for CliError {
    fn from(e: AdmmError) -> Self {
        match e {
            AdmmError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

/// Exit status for a finished plan.
pub fn exit_code_for(status: AdmmStatus) -> i32 {
    match status {
        AdmmStatus::Converged => 0,
        AdmmStatus::MaxIterations => 3,
    }
}

/// Reads the dataset and builds the consensus problem of a run.
pub fn prepare(cfg: &RunConfig) -> Result<ConsensusProblem, CliError> {
    let manifest_path = cfg.manifest_path();
    let manifest = DatasetManifest::read(&manifest_path).map_err(|e| CliError::Data(e.to_string()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let horizon = load_horizon(&manifest, base).map_err(|e| CliError::Data(e.to_string()))?;

    let renewables = cfg.renewable_specs(horizon.dt);
    let mut per_unit = Vec::with_capacity(renewables.len());
    for spec in &renewables {
        let r = horizon
            .renewable_ids
            .iter()
            .position(|id| *id == spec.id)
            .ok_or_else(|| CliError::Config(format!("renewable `{}` has no series in the manifest", spec.id)))?;
        per_unit.push(horizon.per_unit_gen[r].clone());
    }
    let horizon = gridplan::ingest::Horizon {
        per_unit_gen: per_unit,
        renewable_ids: renewables.iter().map(|r| r.id.clone()).collect(),
        ..horizon
    };

    cfg.policy.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let system = SystemSpec {
        storages: cfg.storage_specs(horizon.dt),
        renewables,
        diesels: cfg.diesel_specs(horizon.dt),
    }
    .with_diesel_cap_from_ratio(&cfg.policy, &horizon.demand)
    .map_err(|e| CliError::Data(e.to_string()))?;
    system.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let (windows, map) =
        partition(&horizon, cfg.scenario_length, system.storages.len()).map_err(|e| CliError::Data(e.to_string()))?;
    let (scenarios, map) = match cfg.mode {
        Mode::Historical => (windows, map),
        Mode::ChanceIid => {
            let count = match cfg.chance.count {
                Some(c) => c,
                None => required_scenario_count(&ChanceConfig {
                    alpha: cfg.chance.alpha,
                    epsilon: cfg.chance.epsilon,
                    n_design: system.design_len(),
                })
                .map_err(|e| CliError::Config(e.to_string()))?,
            };
            let draw = build_iid_scenarios(&windows, count, cfg.seed, &system, cfg.chance.initial_soc)
                .map_err(|e| CliError::Config(e.to_string()))?;
            (draw.scenarios, draw.map)
        }
    };
    Ok(ConsensusProblem {
        system,
        policy: cfg.policy,
        scenarios,
        map,
    })
}

/// A finished planning run.
#[derive(Debug, Clone)]
pub struct PlanRun {
    pub problem: ConsensusProblem,
    pub outcome: AdmmOutcome,
    pub report: PlanReport,
}

/// Solves a run without writing anything.
pub fn solve_plan(cfg: &RunConfig) -> Result<PlanRun, CliError> {
    let problem = prepare(cfg)?;
    let admm = cfg.admm.to_config()?;
    let outcome = run(&problem, &admm)?;
    let report = PlanReport::build(&outcome, &problem.scenarios, &problem.system);
    Ok(PlanRun {
        problem,
        outcome,
        report,
    })
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Solves a run and writes `capacities.csv`, `summary.csv`, `trace.csv` and
/// `shortage.csv` into the output directory. Reports are written even when
/// ADMM stops at its iteration limit.
pub fn plan(cfg: &RunConfig) -> Result<PlanRun, CliError> {
    let run = solve_plan(cfg)?;
    let dir = &cfg.output_dir;
    write_file(dir, "capacities.csv", &run.report.capacities_csv())?;
    write_file(dir, "summary.csv", &run.report.summary_csv())?;
    write_file(dir, "trace.csv", &report::trace_csv(&run.outcome))?;
    write_file(dir, "shortage.csv", &run.report.shortage_csv())?;
    Ok(run)
}

/// One point of a diesel-ratio sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub r_dc: f64,
    /// Currency units; `None` when the point failed.
    pub total_cost: Option<f64>,
    pub renewable_fraction: Option<f64>,
    /// `converged`, `max-iterations`, `infeasible` or `error`.
    pub status: String,
}

/// The diesel ratios `0, 0.1, …, 1`.
pub fn default_rdc_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Runs one plan per diesel ratio; failures are recorded and the sweep goes on.
pub fn sweep_rdc(cfg: &RunConfig, grid: &[f64]) -> Result<Vec<SweepPoint>, CliError> {
    if let Some(bad) = grid.iter().find(|g| !(**g >= 0.0)) {
        return Err(CliError::Config(format!("diesel ratio {bad} must be non-negative")));
    }
    let points = grid
        .par_iter()
        .map(|&r_dc| {
            let mut point_cfg = cfg.clone();
            point_cfg.policy.r_dc = r_dc;
            match solve_plan(&point_cfg) {
                Ok(run) => SweepPoint {
                    r_dc,
                    total_cost: Some(run.report.total_cost()),
                    renewable_fraction: Some(run.report.energy.renewable_fraction()),
                    status: report::status_label(run.report.status).to_string(),
                },
                Err(e) => SweepPoint {
                    r_dc,
                    total_cost: None,
                    renewable_fraction: None,
                    status: match e {
                        CliError::Infeasible(_) => "infeasible".into(),
                        _ => "error".into(),
                    },
                },
            }
        })
        .collect();
    Ok(points)
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("r_dc,total_cost,renewable_pct,status\n");
    for p in points {
        let cost = p
            .total_cost
            .map(|c| format!("{:.4}", c / config::MILLION))
            .unwrap_or_default();
        let pct = p
            .renewable_fraction
            .map(|f| format!("{:.2}", 100.0 * f))
            .unwrap_or_default();
        let _ = writeln!(out, "{},{cost},{pct},{}", p.r_dc, p.status);
    }
    out
}

/// Runs the sweep and writes `sweep.csv`.
pub fn sweep_rdc_to_file(cfg: &RunConfig, grid: &[f64]) -> Result<Vec<SweepPoint>, CliError> {
    let points = sweep_rdc(cfg, grid)?;
    write_file(&cfg.output_dir, "sweep.csv", &sweep_csv(&points))?;
    Ok(points)
}

/// One site of a comparison.
#[derive(Debug, Clone)]
pub struct SiteResult {
    pub name: String,
    pub report: PlanReport,
}

/// Plans every site; all sites must share the same technology tables.
pub fn compare_sites(sites: &[(String, RunConfig)]) -> Result<Vec<SiteResult>, CliError> {
    if sites.len() < 2 {
        return Err(CliError::Config("a comparison needs at least two sites".into()));
    }
    let reference = sites[0].1.spec_blocks();
    if let Some((name, _)) = sites.iter().find(|(_, c)| c.spec_blocks() != reference) {
        return Err(CliError::Config(format!(
            "site `{name}` uses technology tables that differ from site `{}`",
            sites[0].0
        )));
    }
    sites
        .par_iter()
        .map(|(name, cfg)| {
            solve_plan(cfg).map(|run| SiteResult {
                name: name.clone(),
                report: run.report,
            })
        })
        .collect()
}

/// Rows per technology (capacity), then total cost and renewable share;
/// one column per site.
pub fn comparison_csv(results: &[SiteResult]) -> String {
    let mut out = String::from("item");
    for r in results {
        let _ = write!(out, ",{}", r.name);
    }
    out.push('\n');
    for (i, row) in results[0].report.rows.iter().enumerate() {
        let _ = write!(out, "{} (MWh)", row.id);
        for r in results {
            let _ = write!(out, ",{:.4}", r.report.rows[i].capacity);
        }
        out.push('\n');
    }
    out.push_str("Total cost (M$)");
    for r in results {
        let _ = write!(out, ",{:.4}", r.report.total_cost() / config::MILLION);
    }
    out.push_str("\nRenewable (%)");
    for r in results {
        let _ = write!(out, ",{:.2}", 100.0 * r.report.energy.renewable_fraction());
    }
    out.push('\n');
    out
}

pub fn compare_sites_to_file(sites: &[(String, RunConfig)], output_dir: &Path) -> Result<Vec<SiteResult>, CliError> {
    let results = compare_sites(sites)?;
    write_file(output_dir, "comparison.csv", &comparison_csv(&results))?;
    Ok(results)
}

/// Number of i.i.d. scenarios required for a given risk and confidence.
pub fn scenario_count(alpha: f64, epsilon: f64, n_design: usize) -> Result<usize, CliError> {
    required_scenario_count(&ChanceConfig {
        alpha,
        epsilon,
        n_design,
    })
    .map_err(|e| CliError::Config(e.to_string()))
}
