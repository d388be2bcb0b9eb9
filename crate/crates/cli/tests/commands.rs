//! The `gridplan` binary end to end on small synthetic sites.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gridplan_cli::synthetic::{write_dataset, SyntheticSite};

/// Two days split into half-day windows; one storage keeps the runs short.
const RUN: &str = r#"
manifest = "manifest.toml"
scenario_length = 12
output_dir = "out"

[policy]
r_sd = 0.05
r_dc = 0.6

[[storage]]
id = "li-ion"
round_trip_efficiency = 0.88
full_charge_hours = 4.0
loss_ratio = 0.01
investment_cost = 17.0
life_years = 15
cap_max = 20.0

[[renewable]]
id = "solar"
kind = "solar"
investment_cost = 52.84
life_years = 30
cap_max = 20.0

[[renewable]]
id = "wind"
kind = "wind"
investment_cost = 24.14
life_years = 20
cap_max = 20.0

[[diesel]]
id = "diesel"
investment_cost = 0.4
life_years = 5
"#;

fn site(dir: &Path, site: SyntheticSite, run: &str) -> std::path::PathBuf {
    write_dataset(&site, dir).unwrap();
    let path = dir.join("run.toml");
    fs::write(&path, run).unwrap();
    path
}

fn two_days(seed: u64) -> SyntheticSite {
    SyntheticSite {
        hours: 48,
        seed,
        ..SyntheticSite::default()
    }
}

fn gridplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridplan"))
        .args(args)
        .output()
        .unwrap()
}

fn text(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn plan_writes_all_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = site(tmp.path(), two_days(4), RUN);
    let out = tmp.path().join("reports");
    let res = gridplan(&["plan", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("converged"));

    let caps = text(&out.join("capacities.csv"));
    for id in ["li-ion", "solar", "wind", "diesel"] {
        assert!(caps.contains(id), "{caps}");
    }
    assert!(text(&out.join("summary.csv")).lines().count() > 1);
    assert!(text(&out.join("trace.csv")).lines().count() > 2);
    // One row per period plus the header.
    assert_eq!(text(&out.join("shortage.csv")).lines().count(), 49);
}

#[test]
fn sweep_and_site_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = site(&tmp.path().join("a"), two_days(4), RUN);
    let out = tmp.path().join("sweep");
    let res = gridplan(&[
        "sweep-rdc",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--grid",
        "0.4,1.0",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let sweep = text(&out.join("sweep.csv"));
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows[0], "r_dc,total_cost,renewable_pct,status");
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r.ends_with(",converged")), "{sweep}");

    let windy = SyntheticSite {
        mean_wind: 9.0,
        clearness: 0.3,
        ..two_days(5)
    };
    let sunny = SyntheticSite {
        mean_wind: 3.5,
        clearness: 0.95,
        ..two_days(5)
    };
    let w = site(&tmp.path().join("windy"), windy, RUN);
    let s = site(&tmp.path().join("sunny"), sunny, RUN);
    let out = tmp.path().join("cmp");
    let res = gridplan(&[
        "compare-sites",
        "--site",
        &format!("windy={}", w.display()),
        "--site",
        &format!("sunny={}", s.display()),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let cmp = text(&out.join("comparison.csv"));
    let cell = |row: &str, col: usize| -> f64 {
        let line = cmp.lines().find(|l| l.starts_with(row)).unwrap();
        line.split(',').nth(col).unwrap().parse().unwrap()
    };
    assert!(cmp.starts_with("item,windy,sunny\n"), "{cmp}");
    assert!(cell("wind", 1) > cell("wind", 2), "{cmp}");
    assert!(cell("Total cost", 1) < cell("Total cost", 2), "{cmp}");
}

#[test]
fn comparison_rejects_different_technologies() {
    let tmp = tempfile::tempdir().unwrap();
    let a = site(&tmp.path().join("a"), two_days(1), RUN);
    let b = site(
        &tmp.path().join("b"),
        two_days(2),
        &RUN.replace("cap_max = 20.0", "cap_max = 30.0"),
    );
    let res = gridplan(&[
        "compare-sites",
        "--site",
        &format!("a={}", a.display()),
        "--site",
        &format!("b={}", b.display()),
        "-o",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("differ"));
}

#[test]
fn unservable_load_exits_with_infeasible_status() {
    // Without diesel and with almost no renewable capacity the load cannot
    // be met within the shortage allowance.
    let run = RUN
        .replace("r_dc = 0.6", "r_dc = 0.0")
        .replace("cap_max = 20.0", "cap_max = 0.01");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = site(tmp.path(), two_days(4), &run);
    let res = gridplan(&[
        "plan",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("infeasible"));
}

#[test]
fn scenario_count_command() {
    let res = gridplan(&[
        "scenario-count",
        "--alpha",
        "0.05",
        "--epsilon",
        "0.01",
        "--n-design",
        "6",
    ]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&res.stdout).trim(), "1082");

    let tmp = tempfile::tempdir().unwrap();
    let cfg = site(tmp.path(), two_days(1), RUN);
    let res = gridplan(&[
        "scenario-count",
        "--alpha",
        "0.5",
        "--epsilon",
        "0.5",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    // Four design parameters.
    let expected = (8.0 / 0.5 * (4.0_f64).ln() + 4.0 * 2.0_f64.ln() + 8.0).ceil();
    assert_eq!(String::from_utf8_lossy(&res.stdout).trim(), format!("{expected}"));

    let res = gridplan(&[
        "scenario-count",
        "--alpha",
        "1.5",
        "--epsilon",
        "0.01",
        "--n-design",
        "6",
    ]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn missing_config_is_reported() {
    let res = gridplan(&["plan", "-c", "/nonexistent/run.toml"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
}
