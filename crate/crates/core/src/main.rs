use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mpisac::experiments::{
    self, fusion_curve, fusion_curve_to_csv, parse_grid, parse_power_grid, records_to_csv,
    seed_range, ExperimentRecord, SearchSettings, SeedPolicy,
};
use mpisac::fusion::FusionProfile;
use mpisac::scenario::{default_scenario, load_scenario, Scenario};

#[derive(Parser)]
#[command(
    name = "mpisac",
    version,
    about = "Sensing/communication functionality selection for cooperating radars"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print the solution as JSON.
    Run(RunArgs),
    /// Joint selection against single-sensor and all-sensing baselines over a power grid.
    Compare(CompareArgs),
    /// Sweep the rate weight and mark Pareto-dominated points.
    Region(RegionArgs),
    /// Exact and approximate fusion accuracy versus voting threshold.
    FusionCurve(FusionCurveArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML or JSON), or `default`.
    #[arg(long, default_value = "default")]
    scenario: String,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Search {
    /// Enumerate every selection instead of neighborhood search.
    #[arg(long)]
    exhaustive: bool,
    /// Maximum flips per neighborhood move.
    #[arg(long = "L", default_value_t = 2)]
    neighborhood: usize,
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
    #[arg(long, default_value_t = 50)]
    max_regen: usize,
    /// Pin the channel seed instead of following the experiment seed.
    #[arg(long)]
    channel_seed: Option<u64>,
    /// Pin the search seed instead of following the experiment seed.
    #[arg(long)]
    search_seed: Option<u64>,
}

impl Search {
    fn settings(&self) -> SearchSettings {
        SearchSettings {
            neighborhood: self.neighborhood,
            max_iter: self.max_iter,
            max_regen: self.max_regen,
            exhaustive: self.exhaustive,
        }
    }

    fn policy(&self) -> SeedPolicy {
        SeedPolicy {
            channel: self.channel_seed,
            search: self.search_seed,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    search: Search,
    /// Rate weight in [0, 1].
    #[arg(long, default_value_t = 0.5, value_parser = parse_mu)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    search: Search,
    #[arg(long, default_value_t = 0.01, value_parser = parse_mu)]
    mu: f64,
    /// Total power budgets: `start:end:step` or a comma list, units allowed.
    #[arg(long, default_value = "10mW:60mW:5mW")]
    psum_grid: String,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct RegionArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    search: Search,
    /// Rate weights: `start:end:step` or a comma list, all in [0, 1].
    #[arg(long, default_value = "0:1:0.1")]
    mu_grid: String,
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct FusionCurveArgs {
    #[command(flatten)]
    common: Common,
    /// Per-sensor rates P as a comma list; defaults to the scenario's table.
    #[arg(long, value_delimiter = ',', requires = "q")]
    p: Option<Vec<f64>>,
    /// Per-sensor rates Q as a comma list.
    #[arg(long, value_delimiter = ',', requires = "p")]
    q: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn parse_mu(s: &str) -> Result<f64, String> {
    let mu: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&mu) {
        Ok(mu)
    } else {
        Err(format!("mu must be in [0, 1], got {mu}"))
    }
}

fn scenario_from(arg: &str) -> Result<Scenario> {
    if arg == "default" {
        Ok(default_scenario())
    } else {
        load_scenario(arg).with_context(|| format!("loading scenario {arg}"))
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn render_records(rows: &[ExperimentRecord], format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(records_to_csv(rows)),
        Format::Json => to_json(&rows),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let scenario = scenario_from(&args.common.scenario)?;
            let policy = args.search.policy();
            let report = experiments::run(
                &scenario,
                args.mu,
                &args.search.settings(),
                policy.channel_seed(args.seed),
                policy.search_seed(args.seed),
            )?;
            emit(&args.common.out, &to_json(&report)?)
        }
        Command::Compare(args) => {
            let scenario = scenario_from(&args.common.scenario)?;
            let grid = parse_power_grid(&args.psum_grid)?;
            let seeds = seed_range(args.seed, args.seeds);
            let (settings, policy) = (args.search.settings(), args.search.policy());
            let rows = experiments::with_worker_pool(|| {
                experiments::compare(&scenario, &grid, &seeds, args.mu, &settings, policy)
            })??;
            emit(&args.common.out, &render_records(&rows, args.format)?)
        }
        Command::Region(args) => {
            let scenario = scenario_from(&args.common.scenario)?;
            let grid = parse_grid(&args.mu_grid)?;
            if let Some(bad) = grid.iter().find(|m| !(0.0..=1.0).contains(*m)) {
                bail!("mu grid value {bad} is outside [0, 1]");
            }
            let seeds = seed_range(args.seed, args.seeds);
            let (settings, policy) = (args.search.settings(), args.search.policy());
            let rows = experiments::with_worker_pool(|| {
                experiments::region(&scenario, &grid, &seeds, &settings, policy)
            })??;
            emit(&args.common.out, &render_records(&rows, args.format)?)
        }
        Command::FusionCurve(args) => {
            let profile = match (args.p, args.q) {
                (Some(p), Some(q)) => {
                    if p.len() != q.len() {
                        bail!("--p has {} rates but --q has {}", p.len(), q.len());
                    }
                    if let Some(r) = p.iter().chain(&q).find(|r| !(0.0..1.0).contains(*r)) {
                        bail!("rate {r} is outside [0, 1)");
                    }
                    FusionProfile::new(p, q)
                }
                _ => {
                    let s = scenario_from(&args.common.scenario)?;
                    FusionProfile::new(s.errors.false_negative, s.errors.false_positive)
                }
            };
            let rows = fusion_curve(&profile)?;
            let text = match args.format {
                Format::Csv => fusion_curve_to_csv(&rows),
                Format::Json => to_json(&rows)?,
            };
            emit(&args.common.out, &text)
        }
    }
}
