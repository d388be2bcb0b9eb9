use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridplan_cli::{
    compare_sites_to_file, default_rdc_grid, exit_code_for, plan, report, scenario_count, sweep_rdc_to_file, CliError,
    Mode, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "gridplan",
    version,
    about = "Capacity planning of hybrid storage and generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the output directory of the config.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `historical` or `chance-iid`.
    #[arg(long)]
    mode: Option<Mode>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::read(&self.config)?;
        if let Some(o) = &self.output {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Plan capacities and write capacity, summary, trace and shortage reports.
    Plan(RunArgs),
    /// Plan once per diesel capacity ratio and write sweep.csv.
    SweepRdc {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated ratios; 0, 0.1, ..., 1 by default.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
    },
    /// Plan several sites with the same technologies and write comparison.csv.
    CompareSites {
        /// `name=config.toml`, at least twice.
        #[arg(long = "site", required = true)]
        sites: Vec<String>,
        #[arg(long, short, default_value = "out")]
        output: PathBuf,
    },
    /// Print the number of i.i.d. scenarios needed for a shortage risk.
    ScenarioCount {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        epsilon: f64,
        /// Number of design parameters; taken from --config when absent.
        #[arg(long)]
        n_design: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Plan(args) => {
            let cfg = args.load()?;
            let run = plan(&cfg)?;
            println!(
                "{}: {} iterations, total cost {:.4} M$, renewable {:.2}%",
                report::status_label(run.report.status),
                run.report.iterations,
                run.report.total_cost() / 1e6,
                100.0 * run.report.energy.renewable_fraction()
            );
            println!("reports written to {}", cfg.output_dir.display());
            Ok(exit_code_for(run.report.status))
        }
        Command::SweepRdc { run, grid } => {
            let cfg = run.load()?;
            let grid = if grid.is_empty() { default_rdc_grid() } else { grid };
            let points = sweep_rdc_to_file(&cfg, &grid)?;
            for p in &points {
                println!("r_dc {:>5}: {}", p.r_dc, p.status);
            }
            Ok(0)
        }
        Command::CompareSites { sites, output } => {
            let mut parsed = Vec::new();
            for s in &sites {
                let (name, path) = s
                    .split_once('=')
                    .ok_or_else(|| CliError::Config(format!("site `{s}` is not of the form name=path")))?;
                let mut cfg = RunConfig::read(path.as_ref())?;
                cfg.output_dir = output.join(name);
                parsed.push((name.to_string(), cfg));
            }
            compare_sites_to_file(&parsed, &output)?;
            println!("comparison written to {}", output.join("comparison.csv").display());
            Ok(0)
        }
        Command::ScenarioCount {
            alpha,
            epsilon,
            n_design,
            config,
        } => {
            let n = match (n_design, config) {
                (Some(n), _) => n,
                (None, Some(path)) => {
                    let cfg = RunConfig::read(&path)?;
                    cfg.storages.len() + cfg.renewables.len() + cfg.diesels.len()
                }
                (None, None) => return Err(CliError::Config("give --n-design or --config".into())),
            };
            println!("{}", scenario_count(alpha, epsilon, n)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
