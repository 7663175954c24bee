//! End-to-end runs: world simulation, strategy evaluation, the ransom game
//! and the lifecycle comparison, plus parameter sweeps over a config field.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, FitnessSourceKind, ScenarioConfig};
use crate::defense::{LevelMapping, Outcome, Strategy, StrategySpec, OUTCOME_CSV_HEADER};
use crate::evaluation::{evaluate_baseline, strategy_population_game, BaselineSummary, StrategySummary};
use crate::game::{
    build_default_matrix, dominance_report, evolve, expected_payoff, is_ess, strategy_fitness, DominanceReport,
    EvolutionReport, FitnessReport, FitnessSource, GameError, GameParams, MixedStrategy, PayoffMatrix2x2,
    PopulationState, StrategyStatistics,
};
use crate::lifecycle::{builtin_profiles, correlate, CorrelationReport};
use crate::topology::build_world;
use crate::world::{events_to_csv, EventKind, InfectionVector, WorldError};

/// Trajectories in reports keep at most this many points.
pub const TRAJECTORY_SAMPLES: usize = 51;

pub const EVENTS_FILE: &str = "events.csv";
pub const LINEAGE_FILE: &str = "lineage.csv";
pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const INFECTED_FILE: &str = "infected.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("world setup failed: {0}")]
    World(#[from] WorldError),
    #[error("game analysis failed: {0}")]
    Game(#[from] GameError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(e) => e.exit_code(),
            ScenarioError::World(_) | ScenarioError::Game(_) => 3,
            ScenarioError::Io { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSummary {
    pub hosts: usize,
    pub ticks: u64,
    pub final_infected: usize,
    pub ever_infected: usize,
    pub lineage_size: usize,
    pub cloud_sync_infections: usize,
    pub event_counts: BTreeMap<String, usize>,
    /// Infected hosts after build and after each tick.
    pub infected_by_tick: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategiesReport {
    pub fitness_source: FitnessSourceKind,
    pub summaries: Vec<StrategySummary>,
    pub baseline: BaselineSummary,
    pub fitness: FitnessReport,
    pub evolution: EvolutionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssVerdict {
    pub candidate: Vec<f64>,
    pub is_ess: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub params: GameParams,
    pub matrix: PayoffMatrix2x2,
    pub dominance: DominanceReport,
    /// User payoff of PAY and NOT_PAY against the configured attacker mix.
    pub user_payoff_vs_mix: [f64; 2],
    pub attacker_payoff_vs_mix: [f64; 2],
    /// Symmetric population game among users, rows PAY and NOT_PAY.
    pub population_game: [[f64; 2]; 2],
    pub fixed_points: Vec<Vec<f64>>,
    pub ess: Vec<EssVerdict>,
    pub evolution: EvolutionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFiles {
    pub events: String,
    pub lineage: String,
    pub outcomes: String,
    pub infected: String,
    pub config_echo: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub world_secs: f64,
    pub strategies_secs: f64,
    pub game_secs: f64,
    pub total_secs: f64,
}

/// Everything a run produced except wall-clock timing, which lives in its
/// own file so the report stays byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub config_echo: String,
    pub outputs: OutputFiles,
    pub world: WorldSummary,
    pub strategies: StrategiesReport,
    pub game: GameReport,
    pub correlation: CorrelationReport,
    #[serde(skip)]
    pub timing: Timing,
}

/// CSV bodies that go next to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub events_csv: String,
    pub lineage_csv: String,
    pub outcomes_csv: String,
    pub infected_csv: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub artifacts: RunArtifacts,
}

/// Keeps the first and last points and an even spread in between.
pub fn sample_trajectory(traj: &[Vec<f64>], max: usize) -> Vec<Vec<f64>> {
    if traj.len() <= max || max < 2 {
        return traj.to_vec();
    }
    let last = traj.len() - 1;
    let mut idx: Vec<usize> = (0..max).map(|k| k * last / (max - 1)).collect();
    idx.dedup();
    idx.into_iter().map(|i| traj[i].clone()).collect()
}

fn sampled(mut r: EvolutionReport) -> EvolutionReport {
    r.trajectory = sample_trajectory(&r.trajectory, TRAJECTORY_SAMPLES);
    r
}

/// Rest points of the two-strategy replicator map for payoff matrix `a`.
fn fixed_points_2x2(a: [[f64; 2]; 2]) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let d = a[0][0] - a[0][1] - a[1][0] + a[1][1];
    if d != 0.0 {
        let x = (a[1][1] - a[0][1]) / d;
        if x > 0.0 && x < 1.0 {
            pts.push(vec![x, 1.0 - x]);
        }
    }
    pts
}

pub fn analyze_game(params: &GameParams, horizon: u64, tolerance: f64) -> Result<GameReport, GameError> {
    let matrix = build_default_matrix(params)?;
    let q = params.attacker_decrypt_prob;
    let mix = MixedStrategy::new(vec![q, 1.0 - q])?;
    let (pay_u, pay_a) = expected_payoff(&matrix, &MixedStrategy::pure(2, 0), &mix)?;
    let (np_u, np_a) = expected_payoff(&matrix, &MixedStrategy::pure(2, 1), &mix)?;
    // a user's payoff does not depend on what other users do
    let a = [[pay_u, pay_u], [np_u, np_u]];
    let sym = PayoffMatrix2x2::symmetric(a);
    let mut ess = Vec::new();
    for cand in [MixedStrategy::pure(2, 0), MixedStrategy::pure(2, 1), MixedStrategy::uniform(2)] {
        ess.push(EssVerdict { candidate: cand.probs().to_vec(), is_ess: is_ess(&sym, &cand, 1e-12)? });
    }
    let source = FitnessSource::Matrix(a.iter().map(|r| r.to_vec()).collect());
    let evolution = evolve(&PopulationState::uniform(2), &source, horizon, tolerance)?;
    Ok(GameReport {
        params: params.clone(),
        dominance: dominance_report(&matrix),
        matrix,
        user_payoff_vs_mix: [pay_u, np_u],
        attacker_payoff_vs_mix: [pay_a, np_a],
        population_game: a,
        fixed_points: fixed_points_2x2(a),
        ess,
        evolution: sampled(evolution),
    })
}

/// Strategy statistics read straight off the qualitative levels.
pub fn analytic_statistics(specs: &[StrategySpec], levels: &LevelMapping, ransom: f64) -> Vec<StrategyStatistics> {
    specs
        .iter()
        .map(|s| StrategyStatistics {
            mean_recovered: levels.level_to_prob(s.effectiveness),
            mean_cost: f64::from(s.static_complexity())
                / (f64::from(crate::defense::MAX_STEP_COMPLEXITY) * s.steps.len() as f64),
            reinfection_rate: levels.level_to_prob(s.reinfection_risk),
            mean_ransom: if s.strategy == Strategy::PayRansom { ransom } else { 0.0 },
        })
        .collect()
}

fn outcomes_csv(outcomes: &[Vec<Outcome>]) -> String {
    let mut s = String::from(OUTCOME_CSV_HEADER);
    s.push('\n');
    for runs in outcomes {
        for (i, o) in runs.iter().enumerate() {
            s.push_str(&crate::defense::outcome_csv_row(i, o));
            s.push('\n');
        }
    }
    s
}

pub fn run_strategies(cfg: &ScenarioConfig) -> Result<(StrategiesReport, String), ScenarioError> {
    cfg.validate()?;
    let specs = cfg.strategy_specs();
    let params = cfg.strategy_params();
    let s = &cfg.strategies;
    let (eval, mc_fitness) = strategy_population_game(
        &specs,
        &params,
        cfg.fixture(),
        &s.weights,
        cfg.game.data_value,
        s.mc_trials,
        cfg.seed(),
    );
    let fitness = match s.fitness_source {
        FitnessSourceKind::MonteCarlo => mc_fitness,
        FitnessSourceKind::Analytic => {
            strategy_fitness(&analytic_statistics(&specs, &s.levels, cfg.game.ransom), &s.weights, cfg.game.data_value)
        }
    };
    let baseline = evaluate_baseline(
        &specs,
        &params,
        cfg.fixture(),
        s.baseline_shadow_fraction,
        s.baseline_trials,
        cfg.seed(),
    );
    let evolution = evolve(
        &PopulationState::uniform(specs.len()),
        &FitnessSource::Constant(fitness.shifted.clone()),
        s.horizon,
        s.tolerance,
    )?;
    let report = StrategiesReport {
        fitness_source: s.fitness_source,
        summaries: eval.summaries,
        baseline,
        fitness,
        evolution: sampled(evolution),
    };
    Ok((report, outcomes_csv(&eval.outcomes)))
}

pub fn run_world(cfg: &ScenarioConfig) -> Result<(WorldSummary, RunArtifacts), ScenarioError> {
    let mut built = build_world(cfg.seed(), &cfg.topology, &cfg.host_setup(), &cfg.av, &cfg.virus)?;
    let world = &mut built.world;
    let mut infected_by_tick = vec![world.infected_count()];
    let mut infected_csv = String::from("tick,infected,ever_infected\n");
    infected_csv.push_str(&format!("0,{},{}\n", world.infected_count(), world.ever_infected_count()));
    for _ in 0..cfg.world.ticks {
        world.step(&mut built.rng);
        infected_by_tick.push(world.infected_count());
        infected_csv.push_str(&format!(
            "{},{},{}\n",
            world.tick,
            world.infected_count(),
            world.ever_infected_count()
        ));
    }
    let mut event_counts = BTreeMap::new();
    for e in &world.events {
        *event_counts.entry(e.kind.as_str().to_owned()).or_insert(0) += 1;
    }
    let cloud_sync_infections = world
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Infect && e.vector == Some(InfectionVector::CloudSync))
        .count();
    let summary = WorldSummary {
        hosts: world.hosts.len(),
        ticks: world.tick,
        final_infected: world.infected_count(),
        ever_infected: world.ever_infected_count(),
        lineage_size: world.lineage.len(),
        cloud_sync_infections,
        event_counts,
        infected_by_tick,
    };
    let artifacts = RunArtifacts {
        events_csv: events_to_csv(&world.events),
        lineage_csv: world.lineage.export_csv(),
        outcomes_csv: String::new(),
        infected_csv,
    };
    Ok((summary, artifacts))
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, ScenarioError> {
    cfg.validate()?;
    let t0 = Instant::now();
    let (world, mut artifacts) = run_world(cfg)?;
    let t_world = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let (strategies, outcomes_csv) = run_strategies(cfg)?;
    artifacts.outcomes_csv = outcomes_csv;
    let t_strat = t1.elapsed().as_secs_f64();
    let t2 = Instant::now();
    let game = analyze_game(&cfg.game, cfg.strategies.horizon, cfg.strategies.tolerance)?;
    let (left, right) = builtin_profiles();
    let correlation = correlate(&left, &right);
    let t_game = t2.elapsed().as_secs_f64();
    let report = RunReport {
        seed: cfg.seed(),
        config_echo: cfg.echo(),
        outputs: OutputFiles {
            events: EVENTS_FILE.into(),
            lineage: LINEAGE_FILE.into(),
            outcomes: OUTCOMES_FILE.into(),
            infected: INFECTED_FILE.into(),
            config_echo: CONFIG_ECHO_FILE.into(),
        },
        world,
        strategies,
        game,
        correlation,
        timing: Timing {
            world_secs: t_world,
            strategies_secs: t_strat,
            game_secs: t_game,
            total_secs: t0.elapsed().as_secs_f64(),
        },
    };
    Ok(RunOutput { report, artifacts })
}

pub fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), ScenarioError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn ensure_dir(dir: &Path) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|source| ScenarioError::Io { path: dir.display().to_string(), source })
}

pub fn write_run(out: &RunOutput, dir: &Path) -> Result<(), ScenarioError> {
    ensure_dir(dir)?;
    let a = &out.artifacts;
    write_file(dir, EVENTS_FILE, &a.events_csv)?;
    write_file(dir, LINEAGE_FILE, &a.lineage_csv)?;
    write_file(dir, OUTCOMES_FILE, &a.outcomes_csv)?;
    write_file(dir, INFECTED_FILE, &a.infected_csv)?;
    write_file(dir, CONFIG_ECHO_FILE, &out.report.config_echo)?;
    write_file(dir, REPORT_FILE, &to_json(&out.report))?;
    write_file(dir, TIMING_FILE, &to_json(&out.report.timing))
}

/// Scalar pulled out of each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    /// Unshifted fitness of one strategy.
    Fitness(Strategy),
    Recovered(Strategy),
    FinalInfected,
    EverInfected,
    CloudSyncInfections,
    BaselineRecovery,
}

impl SweepMetric {
    pub fn parse(s: &str) -> Option<Self> {
        let strategy = |name: &str| Strategy::ALL.into_iter().find(|x| x.as_str().eq_ignore_ascii_case(name));
        match s.split_once(':') {
            Some(("fitness", n)) => strategy(n).map(SweepMetric::Fitness),
            Some(("recovered", n)) => strategy(n).map(SweepMetric::Recovered),
            Some(_) => None,
            None => match s {
                "final_infected" => Some(SweepMetric::FinalInfected),
                "ever_infected" => Some(SweepMetric::EverInfected),
                "cloud_sync_infections" => Some(SweepMetric::CloudSyncInfections),
                "baseline_recovery" => Some(SweepMetric::BaselineRecovery),
                _ => None,
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            SweepMetric::Fitness(s) => format!("fitness:{s}"),
            SweepMetric::Recovered(s) => format!("recovered:{s}"),
            SweepMetric::FinalInfected => "final_infected".into(),
            SweepMetric::EverInfected => "ever_infected".into(),
            SweepMetric::CloudSyncInfections => "cloud_sync_infections".into(),
            SweepMetric::BaselineRecovery => "baseline_recovery".into(),
        }
    }

    pub fn read(&self, r: &RunReport) -> f64 {
        match self {
            SweepMetric::Fitness(s) => r.strategies.fitness.raw[s.index()],
            SweepMetric::Recovered(s) => r.strategies.summaries[s.index()].mean_recovered,
            SweepMetric::FinalInfected => r.world.final_infected as f64,
            SweepMetric::EverInfected => r.world.ever_infected as f64,
            SweepMetric::CloudSyncInfections => r.world.cloud_sync_infections as f64,
            SweepMetric::BaselineRecovery => r.strategies.baseline.mean_data_recovered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub metric: f64,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: String,
    pub metric: String,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn csv(&self) -> String {
        let mut s = format!("{},{}\n", self.parameter, self.metric);
        for p in &self.points {
            s.push_str(&format!("{},{}\n", p.value, p.metric));
        }
        s
    }
}

/// One full run per value. Every point reuses the config's master seed, so
/// differences between points come from the parameter alone.
pub fn sweep(cfg: &ScenarioConfig, path: &str, values: &[f64], metric: SweepMetric) -> Result<SweepReport, ScenarioError> {
    let configs = values
        .iter()
        .map(|v| cfg.with_override(path, *v))
        .collect::<Result<Vec<_>, _>>()?;
    let mut points = Vec::with_capacity(values.len());
    for (value, c) in values.iter().zip(&configs) {
        let report = run_scenario(c)?.report;
        points.push(SweepPoint { value: *value, metric: metric.read(&report), report });
    }
    Ok(SweepReport { parameter: path.to_owned(), metric: metric.name(), points })
}
