//! Deterministic synthetic weather and load, for demonstrations and tests.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Datelike, TimeDelta, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Climate of a synthetic site.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSite {
    pub hours: usize,
    pub seed: u64,
    /// Long-run mean wind speed, m/s.
    pub mean_wind: f64,
    /// Scales clear-sky direct-normal irradiance, in `[0, 1]`.
    pub clearness: f64,
    /// Peak clear-sky direct-normal irradiance, W/m².
    pub peak_irradiance: f64,
}

impl Default for SyntheticSite {
    fn default() -> Self {
        Self {
            hours: 24 * 4,
            seed: 1,
            mean_wind: 7.0,
            clearness: 0.8,
            peak_irradiance: 900.0,
        }
    }
}

/// Hourly load, direct-normal irradiance and wind speed.
pub struct SyntheticSeries {
    pub start: DateTime<Utc>,
    pub load: Vec<f64>,
    pub direct_normal: Vec<f64>,
    pub wind_speed: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one of the pair is enough here.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn generate(site: &SyntheticSite) -> SyntheticSeries {
    use std::f64::consts::PI;
    let start = DateTime::from_timestamp(1_546_300_800, 0).expect("valid start"); // 2019-01-01
    let mut rng = ChaCha8Rng::seed_from_u64(site.seed);
    let mut load = Vec::with_capacity(site.hours);
    let mut dni = Vec::with_capacity(site.hours);
    let mut wind = Vec::with_capacity(site.hours);
    let mut speed = site.mean_wind;
    let mut day_clearness = 1.0;
    for i in 0..site.hours {
        let ts = start + TimeDelta::hours(i as i64);
        let hour = ts.hour() as f64;
        let season = (2.0 * PI * (ts.ordinal() as f64 - 172.0) / 365.25).cos();
        if ts.hour() == 0 {
            day_clearness = rng.gen_range(0.35..1.0);
        }

        let daily = 0.22 * (2.0 * PI * (hour - 12.0) / 24.0).cos().mul_add(-1.0, 0.0)
            + 0.12 * (2.0 * PI * (hour - 19.0) / 24.0).cos();
        let weekend = if ts.weekday().num_days_from_monday() >= 5 {
            -0.08
        } else {
            0.0
        };
        load.push((1.0 + daily + weekend + 0.1 * season + 0.03 * normal(&mut rng)).max(0.2));

        let daylight = 12.0 + 3.0 * season;
        let sunrise = 12.0 - daylight / 2.0;
        let x = (hour + 0.5 - sunrise) / daylight;
        let clear_sky = if (0.0..=1.0).contains(&x) {
            site.peak_irradiance * (PI * x).sin().powf(0.6)
        } else {
            0.0
        };
        dni.push((clear_sky * site.clearness * day_clearness).max(0.0));

        let diurnal = 0.8 * (2.0 * PI * (hour - 15.0) / 24.0).cos();
        speed = site.mean_wind + 0.92 * (speed - site.mean_wind) + 1.1 * normal(&mut rng);
        wind.push((speed + diurnal).clamp(0.0, 30.0));
    }
    SyntheticSeries {
        start,
        load,
        direct_normal: dni,
        wind_speed: wind,
    }
}

fn series_csv(start: DateTime<Utc>, values: &[f64]) -> String {
    let mut out = String::from("timestamp,value\n");
    for (i, v) in values.iter().enumerate() {
        let ts = start + TimeDelta::hours(i as i64);
        let _ = writeln!(out, "{},{v:.4}", ts.format("%Y-%m-%dT%H:%M:%SZ"));
    }
    out
}

/// Manifest for the three series written by [`write_dataset`]; angles and
/// turbine data follow a 20 % efficient, 150 W/m² panel and a turbine rated
/// at 10 m/s with 3 and 20 m/s cut-in and cut-out.
pub const MANIFEST: &str = r#"load = "load.csv"
average_load = 1.0

[[renewable]]
kind = "solar"
id = "solar"
path = "dni.csv"
panel_efficiency = 0.2
rated_output = 150.0
tilt_angle = 30.0
site_angle = 30.0

[[renewable]]
kind = "wind"
id = "wind"
path = "wind.csv"
rotor_diameter = 80.0
turbine_efficiency = 0.4
v_in = 3.0
v_rated = 10.0
v_out = 20.0
"#;

/// Writes `load.csv`, `dni.csv`, `wind.csv` and `manifest.toml` into `dir`.
pub fn write_dataset(site: &SyntheticSite, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let s = generate(site);
    fs::write(dir.join("load.csv"), series_csv(s.start, &s.load))?;
    fs::write(dir.join("dni.csv"), series_csv(s.start, &s.direct_normal))?;
    fs::write(dir.join("wind.csv"), series_csv(s.start, &s.wind_speed))?;
    fs::write(dir.join("manifest.toml"), MANIFEST)
}
