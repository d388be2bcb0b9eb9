//! Weather and load series to per-unit scenario data.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{RenewableKind, ScenarioData};

/// Sea-level air density at 15 °C, kg/m³.
pub const DEFAULT_AIR_DENSITY: f64 = 1.225;
/// One week of hourly periods.
pub const DEFAULT_SCENARIO_LENGTH: usize = 168;
/// Longest run of missing hours that is filled by interpolation.
pub const MAX_INTERPOLATED_GAP: usize = 3;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("load series has non-positive mean {0}")]
    NonPositiveMean(f64),
    #[error("horizon of {horizon} periods is shorter than one scenario of {length}")]
    HorizonTooShort { horizon: usize, length: usize },
    #[error("series are not aligned: {0}")]
    Misaligned(String),
}

fn default_air_density() -> f64 {
    DEFAULT_AIR_DENSITY
}

/// Solar panel conversion parameters; angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolarConfig {
    pub panel_efficiency: f64,
    /// Rated output per m² of panel, W/m².
    pub rated_output: f64,
    pub tilt_angle: f64,
    /// Optional tilt per season (Dec–Feb, Mar–May, Jun–Aug, Sep–Nov),
    /// overriding `tilt_angle` when present.
    #[serde(default)]
    pub seasonal_tilt: Option<[f64; 4]>,
    pub site_angle: f64,
}

impl SolarConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.panel_efficiency > 0.0 && self.panel_efficiency <= 1.0) {
            return Err(IngestError::Config(format!(
                "panel efficiency {} outside (0, 1]",
                self.panel_efficiency
            )));
        }
        if !(self.rated_output > 0.0) {
            return Err(IngestError::Config("rated output must be positive".into()));
        }
        Ok(())
    }

    /// Tilt in force during `month` (1–12).
    pub fn tilt_for_month(&self, month: u32) -> f64 {
        match self.seasonal_tilt {
            Some(t) => t[(month as usize % 12) / 3],
            None => self.tilt_angle,
        }
    }
}

/// Wind turbine conversion parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindConfig {
    #[serde(default = "default_air_density")]
    pub air_density: f64,
    pub rotor_diameter: f64,
    pub turbine_efficiency: f64,
    pub v_in: f64,
    pub v_rated: f64,
    pub v_out: f64,
}

impl WindConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(0.0 < self.v_in && self.v_in < self.v_rated && self.v_rated < self.v_out) {
            return Err(IngestError::Config(format!(
                "wind speeds must satisfy 0 < v_in < v_rated < v_out, got {}, {}, {}",
                self.v_in, self.v_rated, self.v_out
            )));
        }
        if !(self.turbine_efficiency > 0.0 && self.turbine_efficiency <= 1.0) {
            return Err(IngestError::Config("turbine efficiency outside (0, 1]".into()));
        }
        if !(self.air_density > 0.0 && self.rotor_diameter > 0.0) {
            return Err(IngestError::Config(
                "air density and rotor diameter must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Mechanical power in watts captured at `speed`, ignoring the cut-off.
    fn captured_power(&self, speed: f64) -> f64 {
        let area = std::f64::consts::PI * self.rotor_diameter * self.rotor_diameter / 4.0;
        0.5 * self.turbine_efficiency * self.air_density * speed.powi(3) * area
    }
}

/// Per-unit panel output for one direct-normal irradiance reading, using the
/// fixed tilt angle.
pub fn solar_power(direct_normal: f64, cfg: &SolarConfig) -> f64 {
    solar_power_with_tilt(direct_normal, cfg, cfg.tilt_angle)
}

pub fn solar_power_with_tilt(direct_normal: f64, cfg: &SolarConfig, tilt: f64) -> f64 {
    let received = cfg.panel_efficiency * direct_normal.max(0.0) * (tilt - cfg.site_angle).to_radians().cos();
    received.min(cfg.rated_output).max(0.0) / cfg.rated_output
}

/// Per-unit turbine output at wind speed `speed`.
pub fn wind_power(speed: f64, cfg: &WindConfig) -> f64 {
    if speed < cfg.v_in || speed > cfg.v_out {
        0.0
    } else if speed >= cfg.v_rated {
        1.0
    } else {
        cfg.captured_power(speed) / cfg.captured_power(cfg.v_rated)
    }
}

/// Divides a load series by its mean.
pub fn normalize_load(raw: &[f64]) -> Result<Vec<f64>, IngestError> {
    if raw.is_empty() {
        return Err(IngestError::NonPositiveMean(f64::NAN));
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    if !(mean > 0.0) {
        return Err(IngestError::NonPositiveMean(mean));
    }
    Ok(raw.iter().map(|v| v / mean).collect())
}

/// Hourly series with a UTC start time.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    pub start: DateTime<Utc>,
    pub values: Vec<f64>,
}

impl HourlySeries {
    pub fn timestamp(&self, i: usize) -> DateTime<Utc> {
        self.start + TimeDelta::hours(i as i64)
    }
}

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    let naive = raw.trim_end_matches('Z');
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(naive, f).ok())
    .map(|t| t.and_utc())
}

/// Parses a `timestamp,value` CSV. Rows must be in increasing hourly order;
/// empty values and runs of up to [`MAX_INTERPOLATED_GAP`] missing hours are
/// linearly interpolated.
pub fn parse_series<R: Read>(reader: R, path: &Path) -> Result<HourlySeries, IngestError> {
    let fail = |message: String| IngestError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| fail(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "value" {
        return Err(fail(format!(
            "expected header `timestamp,value`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut start: Option<DateTime<Utc>> = None;
    let mut values: Vec<Option<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        let row = line + 2;
        let ts =
            parse_timestamp(&record[0]).ok_or_else(|| fail(format!("row {row}: bad timestamp `{}`", &record[0])))?;
        let value = if record[1].is_empty() {
            None
        } else {
            let v: f64 = record[1]
                .parse()
                .map_err(|_| fail(format!("row {row}: bad value `{}`", &record[1])))?;
            if !v.is_finite() {
                return Err(fail(format!("row {row}: non-finite value")));
            }
            Some(v)
        };
        let Some(t0) = start else {
            if value.is_none() {
                return Err(fail("first row has no value".into()));
            }
            start = Some(ts);
            values.push(value);
            continue;
        };
        let offset = ts - t0;
        if offset.num_seconds() % 3600 != 0 {
            return Err(fail(format!("row {row}: timestamp is not on the hourly grid")));
        }
        let index = offset.num_hours();
        if index < values.len() as i64 {
            return Err(fail(format!("row {row}: timestamps must strictly increase")));
        }
        values.resize(index as usize, None);
        values.push(value);
    }
    let start = start.ok_or_else(|| fail("no data rows".into()))?;
    if values.last().is_some_and(Option::is_none) {
        return Err(fail("last row has no value".into()));
    }

    let mut filled = Vec::with_capacity(values.len());
    let mut i = 0;
    while i < values.len() {
        if let Some(v) = values[i] {
            filled.push(v);
            i += 1;
            continue;
        }
        let gap_end = (i..values.len()).find(|&k| values[k].is_some()).unwrap();
        let gap = gap_end - i;
        if gap > MAX_INTERPOLATED_GAP {
            return Err(fail(format!(
                "{gap} consecutive missing hours from {} exceed the limit of {MAX_INTERPOLATED_GAP}",
                start + TimeDelta::hours(i as i64)
            )));
        }
        let (a, b) = (filled[i - 1], values[gap_end].unwrap());
        for k in 1..=gap {
            filled.push(a + (b - a) * k as f64 / (gap + 1) as f64);
        }
        i = gap_end;
    }
    Ok(HourlySeries { start, values: filled })
}

pub fn read_series(path: &Path) -> Result<HourlySeries, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_series(file, path)
}

/// One renewable source listed in a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RenewableSource {
    /// Direct-normal irradiance series, W/m².
    Solar {
        id: String,
        path: PathBuf,
        #[serde(flatten)]
        config: SolarConfig,
    },
    /// Wind speed series, m/s.
    Wind {
        id: String,
        path: PathBuf,
        #[serde(flatten)]
        config: WindConfig,
    },
}

impl RenewableSource {
    pub fn id(&self) -> &str {
        match self {
            RenewableSource::Solar { id, .. } | RenewableSource::Wind { id, .. } => id,
        }
    }

    pub fn kind(&self) -> RenewableKind {
        match self {
            RenewableSource::Solar { .. } => RenewableKind::Solar,
            RenewableSource::Wind { .. } => RenewableKind::Wind,
        }
    }

    fn path(&self) -> &Path {
        match self {
            RenewableSource::Solar { path, .. } | RenewableSource::Wind { path, .. } => path,
        }
    }
}

fn default_average_load() -> f64 {
    1.0
}

/// Dataset manifest (TOML). Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Load series, any unit; normalized to mean `average_load` MWh.
    pub load: PathBuf,
    #[serde(default = "default_average_load")]
    pub average_load: f64,
    #[serde(default, rename = "renewable")]
    pub renewables: Vec<RenewableSource>,
}

impl DatasetManifest {
    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            IngestError::Config(m) => IngestError::Format {
                path: path.to_path_buf(),
                message: m,
            },
            other => other,
        })
    }
}

/// A whole planning horizon: demand and per-unit renewable series.
#[derive(Debug, Clone, PartialEq)]
pub struct Horizon {
    pub start: DateTime<Utc>,
    /// Demand per period, MWh.
    pub demand: Vec<f64>,
    pub renewable_ids: Vec<String>,
    /// `per_unit_gen[r][t]`
    pub per_unit_gen: Vec<Vec<f64>>,
    pub dt: f64,
}

/// Reads every series of a manifest and converts it to demand and per-unit
/// generation on an hourly grid.
pub fn load_horizon(manifest: &DatasetManifest, base_dir: &Path) -> Result<Horizon, IngestError> {
    let resolve = |p: &Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    };
    let load = read_series(&resolve(&manifest.load))?;
    if !(manifest.average_load > 0.0) {
        return Err(IngestError::Config("average load must be positive".into()));
    }
    let demand: Vec<f64> = normalize_load(&load.values)?
        .into_iter()
        .map(|v| v * manifest.average_load)
        .collect();

    let mut renewable_ids = Vec::new();
    let mut per_unit_gen = Vec::new();
    for source in &manifest.renewables {
        let series = read_series(&resolve(source.path()))?;
        if series.start != load.start || series.values.len() != load.values.len() {
            return Err(IngestError::Misaligned(format!(
                "`{}` covers {} hours from {}, load covers {} hours from {}",
                source.id(),
                series.values.len(),
                series.start,
                load.values.len(),
                load.start
            )));
        }
        if renewable_ids.iter().any(|id| id == source.id()) {
            return Err(IngestError::Config(format!("duplicate renewable `{}`", source.id())));
        }
        let converted = match source {
            RenewableSource::Solar { config, .. } => {
                config.validate()?;
                series
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &dn)| {
                        use chrono::Datelike;
                        solar_power_with_tilt(dn, config, config.tilt_for_month(series.timestamp(i).month()))
                    })
                    .collect()
            }
            RenewableSource::Wind { config, .. } => {
                config.validate()?;
                series.values.iter().map(|&v| wind_power(v, config)).collect()
            }
        };
        renewable_ids.push(source.id().to_string());
        per_unit_gen.push(converted);
    }
    Ok(Horizon {
        start: load.start,
        demand,
        renewable_ids,
        per_unit_gen,
        dt: 1.0,
    })
}

/// Index maps between the local boundary entries of each scenario and the
/// global boundary vector `z_b`.
///
/// A bound scenario has `2|S|` local boundary entries `[S₀[0..S]; S_T[0..S]]`.
/// An unbound scenario has none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMap {
    pub storages: usize,
    pub groups: usize,
    /// `element_of[j][i]`: global index of local boundary entry `i` of scenario `j`.
    pub element_of: Vec<Vec<usize>>,
}

impl BoundaryMap {
    /// Consecutive scenarios share their junction states: the global layout
    /// is `J + 1` blocks of `|S|` entries (start, junctions, end).
    pub fn chained(scenarios: usize, storages: usize) -> Self {
        let element_of = (0..scenarios)
            .map(|j| {
                (0..storages)
                    .map(|s| j * storages + s)
                    .chain((0..storages).map(|s| (j + 1) * storages + s))
                    .collect()
            })
            .collect();
        Self {
            storages,
            groups: if scenarios == 0 { 0 } else { (scenarios + 1) * storages },
            element_of,
        }
    }

    /// No boundary consensus at all.
    pub fn independent(scenarios: usize, storages: usize) -> Self {
        Self {
            storages,
            groups: 0,
            element_of: vec![Vec::new(); scenarios],
        }
    }

    pub fn scenarios(&self) -> usize {
        self.element_of.len()
    }

    /// Global indices bound by scenario `j`.
    pub fn group_of(&self, j: usize) -> &[usize] {
        &self.element_of[j]
    }

    pub fn is_bound(&self, j: usize) -> bool {
        !self.element_of[j].is_empty()
    }

    /// Number of local entries bound to each global index.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.groups];
        for &g in self.element_of.iter().flatten() {
            sizes[g] += 1;
        }
        sizes
    }

    /// `(j, i)` pairs bound to global index `g`.
    pub fn members(&self, g: usize) -> Vec<(usize, usize)> {
        self.element_of
            .iter()
            .enumerate()
            .flat_map(|(j, e)| e.iter().enumerate().filter(|(_, &h)| h == g).map(move |(i, _)| (j, i)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        for (j, e) in self.element_of.iter().enumerate() {
            if !e.is_empty() && e.len() != 2 * self.storages {
                return Err(IngestError::Config(format!(
                    "scenario {j} binds {} boundary entries",
                    e.len()
                )));
            }
            if e.iter().any(|&g| g >= self.groups) {
                return Err(IngestError::Config(format!("scenario {j} binds an index out of range")));
            }
        }
        if let Some(g) = self.group_sizes().iter().position(|&n| n == 0) {
            return Err(IngestError::Config(format!("global boundary index {g} has no binding")));
        }
        Ok(())
    }
}

/// Cuts a horizon into consecutive scenarios of `scenario_length` periods,
/// dropping any incomplete tail, and links them through their storage states.
pub fn partition(
    horizon: &Horizon,
    scenario_length: usize,
    storages: usize,
) -> Result<(Vec<ScenarioData>, BoundaryMap), IngestError> {
    if scenario_length < 2 {
        return Err(IngestError::Config("scenario length must be at least 2".into()));
    }
    let total = horizon.demand.len();
    if total < scenario_length {
        return Err(IngestError::HorizonTooShort {
            horizon: total,
            length: scenario_length,
        });
    }
    let count = total / scenario_length;
    let scenarios = (0..count)
        .map(|j| {
            let range = j * scenario_length..(j + 1) * scenario_length;
            ScenarioData {
                index: j,
                demand: horizon.demand[range.clone()].to_vec(),
                per_unit_gen: horizon.per_unit_gen.iter().map(|r| r[range.clone()].to_vec()).collect(),
                dt: horizon.dt,
                initial_soc: None,
            }
        })
        .collect();
    Ok((scenarios, BoundaryMap::chained(count, storages)))
}
