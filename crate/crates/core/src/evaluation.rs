//! Monte Carlo estimates of strategy outcomes and the fitness vector the
//! replicator dynamics run on.

use serde::{Deserialize, Serialize};

use crate::defense::{
    apply_strategy, baseline_recovery, FixtureSpec, Outcome, RecoveryFixture, Strategy, StrategyParams,
    StrategySpec,
};
use crate::game::{strategy_fitness, FitnessReport, FitnessSpec, StrategyStatistics};
use crate::mc::{mean, run_trials};
use crate::rng::{rng_from_seed, split_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub trials: usize,
    pub mean_recovered: f64,
    pub full_recovery_rate: f64,
    pub malware_removed_rate: f64,
    pub reinfection_rate: f64,
    pub mean_ransom: f64,
    pub mean_complexity: f64,
    pub mean_cost: f64,
}

impl StrategySummary {
    pub fn from_outcomes(strategy: Strategy, outcomes: &[Outcome]) -> Self {
        let rate = |f: fn(&Outcome) -> bool| mean(outcomes.iter().map(|o| f64::from(u8::from(f(o)))));
        StrategySummary {
            strategy,
            trials: outcomes.len(),
            mean_recovered: mean(outcomes.iter().map(|o| o.recovered_fraction)),
            full_recovery_rate: rate(|o| o.full_recovery),
            malware_removed_rate: rate(|o| o.malware_removed),
            reinfection_rate: rate(|o| o.reinfected),
            mean_ransom: mean(outcomes.iter().map(|o| o.ransom_paid)),
            mean_complexity: mean(outcomes.iter().map(|o| f64::from(o.total_complexity))),
            mean_cost: mean(outcomes.iter().map(Outcome::normalized_cost)),
        }
    }

    pub fn statistics(&self) -> StrategyStatistics {
        StrategyStatistics {
            mean_recovered: self.mean_recovered,
            mean_cost: self.mean_cost,
            reinfection_rate: self.reinfection_rate,
            mean_ransom: self.mean_ransom,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrategyEvaluation {
    pub summaries: Vec<StrategySummary>,
    /// Per strategy, outcomes in trial order.
    pub outcomes: Vec<Vec<Outcome>>,
}

/// Runs every spec `trials` times on clones of one infected fixture host.
pub fn evaluate_strategies(
    specs: &[StrategySpec],
    params: &StrategyParams,
    fixture: FixtureSpec,
    trials: usize,
    master_seed: u64,
) -> StrategyEvaluation {
    let base = split_seed(master_seed, stream::STRATEGIES);
    let fx = RecoveryFixture::build(fixture, base);
    let mut summaries = Vec::with_capacity(specs.len());
    let mut outcomes = Vec::with_capacity(specs.len());
    for spec in specs {
        let seed = split_seed(base, spec.strategy.index() as u64 + 1);
        let runs = run_trials(trials, seed, |_, s| {
            let mut world = fx.world.clone();
            let mut rng = rng_from_seed(s);
            apply_strategy(&mut world, fx.host, spec, params, &mut rng).expect("fixture host supports every strategy")
        });
        summaries.push(StrategySummary::from_outcomes(spec.strategy, &runs));
        outcomes.push(runs);
    }
    StrategyEvaluation { summaries, outcomes }
}

/// Monte Carlo fitness of each strategy, shifted to positivity.
pub fn strategy_population_game(
    specs: &[StrategySpec],
    params: &StrategyParams,
    fixture: FixtureSpec,
    fitness: &FitnessSpec,
    data_value: f64,
    mc_trials: usize,
    master_seed: u64,
) -> (StrategyEvaluation, FitnessReport) {
    let eval = evaluate_strategies(specs, params, fixture, mc_trials, master_seed);
    let stats: Vec<StrategyStatistics> = eval.summaries.iter().map(StrategySummary::statistics).collect();
    let report = strategy_fitness(&stats, fitness, data_value);
    (eval, report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub trials: usize,
    pub shadow_fraction: f64,
    /// Mean fraction of each victim's encrypted data that came back.
    pub mean_data_recovered: f64,
    /// Share of victims who got every file back.
    pub full_recovery_rate: f64,
    pub reinfection_rate: f64,
}

/// Victims who refuse to pay and work through the free routes.
pub fn evaluate_baseline(
    specs: &[StrategySpec],
    params: &StrategyParams,
    fixture: FixtureSpec,
    shadow_fraction: f64,
    trials: usize,
    master_seed: u64,
) -> BaselineSummary {
    let base = split_seed(master_seed, stream::BASELINE);
    let with = RecoveryFixture::build(FixtureSpec { snapshot: true, ..fixture }, base);
    let without = RecoveryFixture::build(FixtureSpec { snapshot: false, ..fixture }, base);
    let runs = run_trials(trials, split_seed(base, 1), |_, s| {
        let mut rng = rng_from_seed(s);
        baseline_recovery(&with, &without, shadow_fraction, specs, params, &mut rng)
    });
    BaselineSummary {
        trials,
        shadow_fraction,
        mean_data_recovered: mean(runs.iter().map(|r| r.data_recovered)),
        full_recovery_rate: mean(runs.iter().map(|r| f64::from(u8::from(r.data_recovered >= 1.0)))),
        reinfection_rate: mean(runs.iter().map(|r| f64::from(u8::from(r.reinfected)))),
    }
}
