//! Run configuration (TOML) and conversion of technology tables into specs.

use std::path::{Path, PathBuf};

use gridplan::chance::InitialSocDraw;
use gridplan::consensus::{AdmmConfig, DualRescale, RhoBalance};
use gridplan::ingest::DEFAULT_SCENARIO_LENGTH;
use gridplan::model::{
    amortization, one_way_efficiency, power_ratio, DieselSpec, RatioPolicy, RenewableKind, RenewableSpec, StorageSpec,
};
use gridplan::subqp::{QpMethod, SubqpSettings};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Table costs are quoted in millions.
pub const MILLION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Consecutive historical windows linked by their storage states.
    #[default]
    Historical,
    /// Windows drawn i.i.d. from the history, design consensus only.
    ChanceIid,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "historical" | "historical-consensus" => Ok(Mode::Historical),
            "chance-iid" => Ok(Mode::ChanceIid),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

fn default_om_storage() -> f64 {
    1.0
}

fn default_diesel_quad() -> [f64; 3] {
    [40.0, 80.0, 0.0]
}

/// One storage row: round-trip efficiency, full-charge time in hours, loss
/// ratio per period, investment in M$/MWh, lifespan in years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageBlock {
    pub id: String,
    pub round_trip_efficiency: f64,
    pub full_charge_hours: f64,
    pub loss_ratio: f64,
    pub investment_cost: f64,
    pub life_years: f64,
    /// Overrides the straight-line amortization per period.
    #[serde(default)]
    pub amortization: Option<f64>,
    /// $/MWh charged or discharged.
    #[serde(default = "default_om_storage")]
    pub om_cost: f64,
    #[serde(default)]
    pub cap_min: f64,
    pub cap_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewableBlock {
    /// Must match a renewable series in the dataset manifest.
    pub id: String,
    pub kind: RenewableKind,
    /// M$/MW installed.
    pub investment_cost: f64,
    pub life_years: f64,
    #[serde(default)]
    pub amortization: Option<f64>,
    /// $/MWh generated; 7.1 for solar and 1.8 for wind when absent.
    #[serde(default)]
    pub om_cost: Option<f64>,
    #[serde(default)]
    pub cap_min: f64,
    pub cap_max: f64,
}

/// Diesel capacity is capped by the ratio policy, not configured here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DieselBlock {
    pub id: String,
    pub investment_cost: f64,
    pub life_years: f64,
    #[serde(default)]
    pub amortization: Option<f64>,
    /// `[q2, q1, q0]` in $ for output in MWh.
    #[serde(default = "default_diesel_quad")]
    pub om_quad: [f64; 3],
    #[serde(default)]
    pub ramp_up: Option<f64>,
    #[serde(default)]
    pub ramp_down: Option<f64>,
    #[serde(default)]
    pub cap_min: f64,
}

/// Optional overrides of the ADMM defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmSection {
    pub rho0: Option<f64>,
    pub tau: Option<f64>,
    pub mu: Option<f64>,
    pub eps_abs: Option<f64>,
    pub eps_rel: Option<f64>,
    pub max_iterations: Option<usize>,
    pub adaptive_rho: Option<bool>,
    pub adapt_iterations: Option<usize>,
    /// `normalized` or `absolute`.
    pub rho_balance: Option<String>,
    /// `keep-scaled` or `keep-unscaled`.
    pub dual_rescale: Option<String>,
    /// `interior-point` or `operator-splitting`.
    pub qp_method: Option<String>,
    pub qp_tol_abs: Option<f64>,
    pub qp_tol_rel: Option<f64>,
    pub qp_max_iter: Option<usize>,
}

impl AdmmSection {
    pub fn to_config(&self) -> Result<AdmmConfig, CliError> {
        let d = AdmmConfig::default();
        let dual_rescale = match self.dual_rescale.as_deref() {
            None => d.dual_rescale,
            Some("keep-scaled") => DualRescale::KeepScaled,
            Some("keep-unscaled") => DualRescale::KeepUnscaled,
            Some(other) => return Err(CliError::Config(format!("unknown dual_rescale `{other}`"))),
        };
        let rho_balance = match self.rho_balance.as_deref() {
            None => d.rho_balance,
            Some("normalized") => RhoBalance::Normalized,
            Some("absolute") => RhoBalance::Absolute,
            Some(other) => return Err(CliError::Config(format!("unknown rho_balance `{other}`"))),
        };
        let sub = SubqpSettings::default();
        let method = match self.qp_method.as_deref() {
            None => sub.method,
            Some("interior-point") => QpMethod::InteriorPoint,
            Some("operator-splitting") => QpMethod::OperatorSplitting,
            Some(other) => return Err(CliError::Config(format!("unknown qp_method `{other}`"))),
        };
        Ok(AdmmConfig {
            rho0: self.rho0.unwrap_or(d.rho0),
            tau: self.tau.unwrap_or(d.tau),
            mu: self.mu.unwrap_or(d.mu),
            eps_abs: self.eps_abs.unwrap_or(d.eps_abs),
            eps_rel: self.eps_rel.unwrap_or(d.eps_rel),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            adaptive_rho: self.adaptive_rho.unwrap_or(d.adaptive_rho),
            adapt_iterations: self.adapt_iterations.unwrap_or(d.adapt_iterations),
            rho_balance,
            dual_rescale,
            subqp: SubqpSettings {
                method,
                tol_abs: self.qp_tol_abs.unwrap_or(sub.tol_abs),
                tol_rel: self.qp_tol_rel.unwrap_or(sub.tol_rel),
                max_iter: self.qp_max_iter.unwrap_or(sub.max_iter),
                ipm_max_iter: sub.ipm_max_iter,
            },
        })
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_epsilon() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChanceSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Number of drawn scenarios; the sampling bound when absent.
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub initial_soc: InitialSocDraw,
}

impl Default for ChanceSection {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            epsilon: default_epsilon(),
            count: None,
            initial_soc: InitialSocDraw::default(),
        }
    }
}

fn default_scenario_length() -> usize {
    DEFAULT_SCENARIO_LENGTH
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset manifest, relative to the config file.
    pub manifest: PathBuf,
    #[serde(default = "default_scenario_length")]
    pub scenario_length: usize,
    #[serde(default)]
    pub mode: Mode,
    /// Output directory, relative to the working directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub policy: RatioPolicy,
    #[serde(default)]
    pub admm: AdmmSection,
    #[serde(default)]
    pub chance: ChanceSection,
    #[serde(default, rename = "storage")]
    pub storages: Vec<StorageBlock>,
    #[serde(default, rename = "renewable")]
    pub renewables: Vec<RenewableBlock>,
    #[serde(default, rename = "diesel")]
    pub diesels: Vec<DieselBlock>,
    /// Directory the manifest path is resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn manifest_path(&self) -> PathBuf {
        if self.manifest.is_absolute() {
            self.manifest.clone()
        } else {
            self.base_dir.join(&self.manifest)
        }
    }

    /// Technology tables as compared across sites.
    pub fn spec_blocks(&self) -> (&[StorageBlock], &[RenewableBlock], &[DieselBlock]) {
        (&self.storages, &self.renewables, &self.diesels)
    }

    pub fn storage_specs(&self, dt: f64) -> Vec<StorageSpec> {
        self.storages
            .iter()
            .map(|b| StorageSpec {
                id: b.id.clone(),
                eta: one_way_efficiency(b.round_trip_efficiency),
                delta: power_ratio(b.full_charge_hours),
                xi: b.loss_ratio,
                inv_cost: b.investment_cost * MILLION,
                amort: b.amortization.unwrap_or_else(|| amortization(dt, b.life_years)),
                om_coeff: b.om_cost,
                cap_min: b.cap_min,
                cap_max: b.cap_max,
            })
            .collect()
    }

    pub fn renewable_specs(&self, dt: f64) -> Vec<RenewableSpec> {
        self.renewables
            .iter()
            .map(|b| RenewableSpec {
                id: b.id.clone(),
                kind: b.kind,
                inv_cost: b.investment_cost * MILLION,
                amort: b.amortization.unwrap_or_else(|| amortization(dt, b.life_years)),
                om_coeff: b.om_cost.unwrap_or(match b.kind {
                    RenewableKind::Solar => 7.1,
                    RenewableKind::Wind => 1.8,
                }),
                cap_min: b.cap_min,
                cap_max: b.cap_max,
            })
            .collect()
    }

    /// Diesel specs with `cap_max` left at `+∞`, to be capped by the policy.
    pub fn diesel_specs(&self, dt: f64) -> Vec<DieselSpec> {
        self.diesels
            .iter()
            .map(|b| DieselSpec {
                id: b.id.clone(),
                inv_cost: b.investment_cost * MILLION,
                amort: b.amortization.unwrap_or_else(|| amortization(dt, b.life_years)),
                om_quad: (b.om_quad[0], b.om_quad[1], b.om_quad[2]),
                ramp_up: b.ramp_up.unwrap_or(f64::INFINITY),
                ramp_down: b.ramp_down.unwrap_or(f64::NEG_INFINITY),
                cap_min: b.cap_min,
                cap_max: f64::INFINITY,
            })
            .collect()
    }
}
