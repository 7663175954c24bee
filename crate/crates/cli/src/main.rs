//! `virosim` command line.
//!
//! Exit status: 0 success, 2 missing input, 3 invalid config, 4 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use virosim::config::{demo_config, parse_config, ConfigError, ScenarioConfig, DEFAULT_SEED};
use virosim::lifecycle::{builtin_profiles, correlate, VirusProfile};
use virosim::scenario::{
    analyze_game, ensure_dir, run_scenario, run_strategies, sweep, to_json, write_file, write_run, ScenarioError,
    SweepMetric, OUTCOMES_FILE,
};

const SEED_ENV: &str = "SIM_SEED";

#[derive(Parser)]
#[command(name = "virosim", version, about = "Polymorphic ransomware spread and recovery-strategy simulator")]
struct Cli {
    /// Suppress the summary printed to stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Scenario file (TOML). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config and SIM_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `world.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo trials per strategy.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// World simulation, strategy evaluation, game and correlation reports.
    Simulate(RunArgs),
    /// The star-with-cloud scenario: 100 hosts, 200 ticks, 10^4 trials.
    Demo(RunArgs),
    /// Ransom payoff matrix, dominance and replicator analysis.
    Game(RunArgs),
    /// Monte Carlo outcomes and fitness of the recovery strategies.
    Strategies(RunArgs),
    /// Trait and lifecycle comparison of two virus profiles.
    Correlate {
        /// Two profile files; the built-in pair when omitted.
        #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"])]
        profiles: Option<Vec<PathBuf>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the scenario for each value of one numeric config field.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted field path, e.g. `game.ransom`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// `fitness:<STRATEGY>`, `recovered:<STRATEGY>`, `final_infected`,
        /// `ever_infected`, `cloud_sync_infections` or `baseline_recovery`.
        #[arg(long, default_value = "fitness:PAY_RANSOM")]
        metric: String,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn invalid(message: String) -> Failure {
    Failure { code: 3, message }
}

/// Loads the config and applies command-line overrides. Seed precedence:
/// `--seed`, then the config, then `SIM_SEED`, then the built-in default.
fn resolve(args: &RunArgs, base: ScenarioConfig) -> Result<(ScenarioConfig, PathBuf), Failure> {
    let mut cfg = match &args.config {
        Some(p) => parse_config(p)?,
        None => base,
    };
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| invalid(format!("{SEED_ENV}={v} is not a u64")))?),
        Err(_) => None,
    };
    cfg.world.master_seed = Some(args.seed.or(cfg.world.master_seed).or(env_seed).unwrap_or(DEFAULT_SEED));
    if let Some(t) = args.trials {
        cfg.strategies.mc_trials = t;
    }
    cfg.validate()?;
    // --out is not written into the config so the echo does not depend on it
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.world.out_dir));
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let say = |s: String| {
        if !cli.quiet {
            println!("{s}");
        }
    };
    match cli.command {
        Command::Simulate(args) => simulate(&args, ScenarioConfig::default(), &say),
        Command::Demo(args) => simulate(&args, demo_config(), &say),
        Command::Game(args) => {
            let (cfg, out) = resolve(&args, ScenarioConfig::default())?;
            let g = analyze_game(&cfg.game, cfg.strategies.horizon, cfg.strategies.tolerance)
                .map_err(|e| invalid(e.to_string()))?;
            ensure_dir(&out)?;
            write_file(&out, "game.json", &to_json(&g))?;
            say(format!(
                "user dominant action: {}",
                g.dominance.row_player.strictly_dominant.as_deref().unwrap_or("none")
            ));
            say(format!("final user shares [PAY, NOT_PAY]: {:?}", g.evolution.final_shares));
            say(format!("wrote {}", out.join("game.json").display()));
            Ok(())
        }
        Command::Strategies(args) => {
            let (cfg, out) = resolve(&args, ScenarioConfig::default())?;
            let (report, csv) = run_strategies(&cfg)?;
            ensure_dir(&out)?;
            write_file(&out, "strategies.json", &to_json(&report))?;
            write_file(&out, OUTCOMES_FILE, &csv)?;
            for (s, f) in report.summaries.iter().zip(&report.fitness.raw) {
                say(format!(
                    "{:<17} recovered {:.4}  reinfected {:.4}  fitness {:+.4}",
                    s.strategy.as_str(),
                    s.mean_recovered,
                    s.reinfection_rate,
                    f
                ));
            }
            say(format!("baseline data recovery {:.4}", report.baseline.mean_data_recovered));
            Ok(())
        }
        Command::Correlate { profiles, out } => {
            let (left, right) = match profiles {
                Some(p) => (load_profile(&p[0])?, load_profile(&p[1])?),
                None => builtin_profiles(),
            };
            let r = correlate(&left, &right);
            let out = out.unwrap_or_else(|| PathBuf::from("out"));
            ensure_dir(&out)?;
            write_file(&out, "correlation.json", &to_json(&r))?;
            say(format!("{} vs {}", r.left, r.right));
            say(format!("core trait similarity {:.4}", r.core_similarity));
            say(format!("full trait similarity {:.4}", r.full_similarity));
            say(format!("lifecycle alignment: {} stages matched, score {:.4}", r.alignment.lcs_len, r.alignment.score));
            Ok(())
        }
        Command::Sweep { run, param, values, metric } => {
            let (cfg, out) = resolve(&run, ScenarioConfig::default())?;
            let metric = SweepMetric::parse(&metric).ok_or_else(|| invalid(format!("unknown metric {metric}")))?;
            let report = sweep(&cfg, &param, &values, metric)?;
            ensure_dir(&out)?;
            write_file(&out, "sweep.json", &to_json(&report))?;
            write_file(&out, "sweep.csv", &report.csv())?;
            for p in &report.points {
                say(format!("{} = {} -> {} = {}", report.parameter, p.value, report.metric, p.metric));
            }
            Ok(())
        }
    }
}

fn simulate(args: &RunArgs, base: ScenarioConfig, say: &dyn Fn(String)) -> Result<(), Failure> {
    let (cfg, out) = resolve(args, base)?;
    let result = run_scenario(&cfg)?;
    write_run(&result, &out)?;
    let r = &result.report;
    say(format!("seed {}", r.seed));
    say(format!(
        "{} hosts, {} ticks: {} infected at end, {} ever infected, {} variants",
        r.world.hosts, r.world.ticks, r.world.final_infected, r.world.ever_infected, r.world.lineage_size
    ));
    for (s, f) in r.strategies.summaries.iter().zip(&r.strategies.fitness.raw) {
        say(format!("{:<17} recovered {:.4}  fitness {:+.4}", s.strategy.as_str(), s.mean_recovered, f));
    }
    say(format!("baseline data recovery {:.4}", r.strategies.baseline.mean_data_recovered));
    say(format!("wrote {} in {:.2}s", out.display(), r.timing.total_secs));
    Ok(())
}

fn load_profile(path: &Path) -> Result<VirusProfile, Failure> {
    if !path.exists() {
        return Err(Failure { code: 2, message: format!("profile not found: {}", path.display()) });
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure { code: 4, message: format!("cannot read {}: {e}", path.display()) })?;
    VirusProfile::from_toml(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
