//! The ransom game and evolutionary dynamics over recovery strategies.
//!
//! The user chooses to pay or not; the attacker chooses to decrypt or not.
//! Default payoffs are built from recovery statistics and must honour two
//! qualitative constraints: paying always benefits the attacker more than
//! not paying, and paying without getting data back is worse for the user
//! than not paying at all.
//!
//! Population dynamics use the discrete-time replicator map
//! `x'_i = x_i f_i / sum_j x_j f_j`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SIMPLEX_TOLERANCE: f64 = 1e-9;
pub const MIXED_TOLERANCE: f64 = 1e-12;
/// Minimum fitness after the positivity shift.
pub const FITNESS_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("payoff constraint violated: {0}")]
    Constraint(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("not a probability vector: {0}")]
    NotOnSimplex(String),
    #[error("degenerate fitness: population-average fitness is {0}")]
    DegenerateFitness(f64),
    #[error("fitness must be finite and non-negative, got {0}")]
    NegativeFitness(f64),
    #[error("game is not symmetric")]
    NotSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UserAction {
    Pay,
    NotPay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AttackerAction {
    Decrypt,
    NotDecrypt,
}

/// Bimatrix game with two actions per player. `entries[row][col]` holds
/// `(row payoff, column payoff)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix2x2 {
    pub row_labels: [String; 2],
    pub col_labels: [String; 2],
    pub entries: [[(f64, f64); 2]; 2],
}

impl PayoffMatrix2x2 {
    pub fn new(entries: [[(f64, f64); 2]; 2]) -> Self {
        PayoffMatrix2x2 {
            row_labels: ["R0".into(), "R1".into()],
            col_labels: ["C0".into(), "C1".into()],
            entries,
        }
    }

    /// Symmetric game from the row player's payoff matrix `a`.
    pub fn symmetric(a: [[f64; 2]; 2]) -> Self {
        let mut m = PayoffMatrix2x2::new([[(0.0, 0.0); 2]; 2]);
        for i in 0..2 {
            for j in 0..2 {
                m.entries[i][j] = (a[i][j], a[j][i]);
            }
        }
        m.row_labels = ["S0".into(), "S1".into()];
        m.col_labels = ["S0".into(), "S1".into()];
        m
    }

    pub fn user(&self, u: UserAction, a: AttackerAction) -> f64 {
        self.entries[u as usize][a as usize].0
    }

    pub fn attacker(&self, u: UserAction, a: AttackerAction) -> f64 {
        self.entries[u as usize][a as usize].1
    }

    fn row(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j].0
    }

    fn col(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j].1
    }
}

/// Parameters of the default ransom matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameParams {
    pub data_value: f64,
    pub ransom: f64,
    pub p_full: f64,
    pub mean_restore: f64,
    /// Fraction of data recovered without paying.
    pub alt_recovery: f64,
    /// Attacker's cost of decrypting (reputation term).
    pub reputation: f64,
    /// Attacker mix used when reporting the user's expected payoffs.
    pub attacker_decrypt_prob: f64,
}

impl Default for GameParams {
    fn default() -> Self {
        GameParams {
            data_value: 100.0,
            ransom: 20.0,
            p_full: 0.08,
            mean_restore: 0.65,
            alt_recovery: 0.90,
            reputation: 0.0,
            attacker_decrypt_prob: 0.5,
        }
    }
}

pub fn build_default_matrix(p: &GameParams) -> Result<PayoffMatrix2x2, GameError> {
    if !(p.data_value > 0.0) {
        return Err(GameError::Parameter(format!("data_value must be > 0, got {}", p.data_value)));
    }
    if !(p.ransom >= 0.0) {
        return Err(GameError::Parameter(format!("ransom must be >= 0, got {}", p.ransom)));
    }
    let v = p.data_value;
    let r = p.ransom;
    let rho = p.reputation;
    let not_pay = p.alt_recovery * v;
    let m = PayoffMatrix2x2 {
        row_labels: ["PAY".into(), "NOT_PAY".into()],
        col_labels: ["DECRYPT".into(), "NOT_DECRYPT".into()],
        entries: [
            [(p.mean_restore * v - r, r - rho), (-r, r)],
            [(not_pay, -rho), (not_pay, 0.0)],
        ],
    };
    check_ransom_constraints(&m)?;
    Ok(m)
}

/// The two qualitative constraints every ransom matrix must satisfy.
pub fn check_ransom_constraints(m: &PayoffMatrix2x2) -> Result<(), GameError> {
    use AttackerAction::*;
    use UserAction::*;
    for a in [Decrypt, NotDecrypt] {
        if !(m.attacker(Pay, a) > m.attacker(NotPay, a)) {
            return Err(GameError::Constraint(format!(
                "attacker(PAY, {a:?}) = {} must exceed attacker(NOT_PAY, {a:?}) = {}",
                m.attacker(Pay, a),
                m.attacker(NotPay, a)
            )));
        }
    }
    if !(m.user(Pay, NotDecrypt) < m.user(NotPay, NotDecrypt)) {
        return Err(GameError::Constraint(format!(
            "user(PAY, NOT_DECRYPT) = {} must be below user(NOT_PAY, NOT_DECRYPT) = {}",
            m.user(Pay, NotDecrypt),
            m.user(NotPay, NotDecrypt)
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self, GameError> {
        check_simplex(&probs, MIXED_TOLERANCE)?;
        Ok(MixedStrategy(probs))
    }

    pub fn pure(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        MixedStrategy(v)
    }

    pub fn uniform(n: usize) -> Self {
        MixedStrategy(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

fn check_simplex(v: &[f64], tol: f64) -> Result<(), GameError> {
    if v.is_empty() {
        return Err(GameError::NotOnSimplex("empty vector".into()));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(GameError::NotOnSimplex(format!("entry {x}")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(GameError::NotOnSimplex(format!("sum {s}")));
    }
    Ok(())
}

/// Bilinear expectation `(x' A y, x' B y)`.
pub fn expected_payoff(
    m: &PayoffMatrix2x2,
    row: &MixedStrategy,
    col: &MixedStrategy,
) -> Result<(f64, f64), GameError> {
    for s in [row, col] {
        if s.0.len() != 2 {
            return Err(GameError::Dimension { expected: 2, got: s.0.len() });
        }
    }
    let mut u = 0.0;
    let mut a = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let w = row.0[i] * col.0[j];
            u += w * m.row(i, j);
            a += w * m.col(i, j);
        }
    }
    Ok((u, a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub against: String,
    /// All maximizing actions; more than one means a tie.
    pub actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerDominance {
    pub strictly_dominant: Option<String>,
    pub weakly_dominant: Option<String>,
    pub best_responses: Vec<BestResponse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub row_player: PlayerDominance,
    pub col_player: PlayerDominance,
}

/// `payoff(own, other)` for one player.
fn player_dominance(
    own: &[String; 2],
    other: &[String; 2],
    payoff: impl Fn(usize, usize) -> f64,
) -> PlayerDominance {
    let mut strictly = None;
    let mut weakly = None;
    for a in 0..2 {
        let b = 1 - a;
        let diffs: Vec<f64> = (0..2).map(|o| payoff(a, o) - payoff(b, o)).collect();
        if diffs.iter().all(|d| *d > 0.0) {
            strictly = Some(own[a].clone());
        }
        if diffs.iter().all(|d| *d >= 0.0) && diffs.iter().any(|d| *d > 0.0) {
            weakly = Some(own[a].clone());
        }
    }
    let best_responses = (0..2)
        .map(|o| {
            let best = payoff(0, o).max(payoff(1, o));
            BestResponse {
                against: other[o].clone(),
                actions: (0..2)
                    .filter(|&a| payoff(a, o) == best)
                    .map(|a| own[a].clone())
                    .collect(),
            }
        })
        .collect();
    PlayerDominance {
        strictly_dominant: strictly,
        weakly_dominant: weakly,
        best_responses,
    }
}

/// Dominance and pure best responses for both players. Ties are reported as
/// ties, never broken.
pub fn dominance_report(m: &PayoffMatrix2x2) -> DominanceReport {
    DominanceReport {
        row_player: player_dominance(&m.row_labels, &m.col_labels, |a, o| m.row(a, o)),
        col_player: player_dominance(&m.col_labels, &m.row_labels, |a, o| m.col(o, a)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub shares: Vec<f64>,
    pub tick: u64,
}

impl PopulationState {
    pub fn new(shares: Vec<f64>) -> Result<Self, GameError> {
        check_simplex(&shares, SIMPLEX_TOLERANCE)?;
        Ok(PopulationState { shares, tick: 0 })
    }

    pub fn uniform(k: usize) -> Self {
        PopulationState { shares: vec![1.0 / k as f64; k], tick: 0 }
    }
}

pub fn replicator_step(pop: &PopulationState, fitness: &[f64]) -> Result<PopulationState, GameError> {
    if fitness.len() != pop.shares.len() {
        return Err(GameError::Dimension { expected: pop.shares.len(), got: fitness.len() });
    }
    if let Some(f) = fitness.iter().find(|f| !f.is_finite() || **f < 0.0) {
        return Err(GameError::NegativeFitness(*f));
    }
    let avg: f64 = pop.shares.iter().zip(fitness).map(|(x, f)| x * f).sum();
    if !(avg > 0.0) {
        return Err(GameError::DegenerateFitness(avg));
    }
    let mut shares: Vec<f64> = pop.shares.iter().zip(fitness).map(|(x, f)| x * f / avg).collect();
    let s: f64 = shares.iter().sum();
    shares.iter_mut().for_each(|x| *x /= s);
    Ok(PopulationState { shares, tick: pop.tick + 1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessSource {
    Constant(Vec<f64>),
    /// Frequency-dependent fitness `A x` of a symmetric population game.
    Matrix(Vec<Vec<f64>>),
}

impl FitnessSource {
    /// Constant added to matrix entries so every fitness is at least
    /// [`FITNESS_FLOOR`]; zero for constant sources and positive matrices.
    pub fn positivity_offset(&self) -> f64 {
        match self {
            FitnessSource::Constant(_) => 0.0,
            FitnessSource::Matrix(a) => {
                let min = a.iter().flatten().copied().fold(f64::INFINITY, f64::min);
                if min > 0.0 {
                    0.0
                } else {
                    FITNESS_FLOOR - min
                }
            }
        }
    }

    fn fitness(&self, shares: &[f64], offset: f64) -> Vec<f64> {
        match self {
            FitnessSource::Constant(f) => f.clone(),
            FitnessSource::Matrix(a) => a
                .iter()
                .map(|row| row.iter().zip(shares).map(|(aij, x)| (aij + offset) * x).sum())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub trajectory: Vec<Vec<f64>>,
    pub converged: bool,
    pub converged_at: Option<u64>,
    pub final_shares: Vec<f64>,
    pub offset: f64,
}

/// Iterates the replicator map for up to `horizon` steps, stopping early once
/// the largest share change falls below `tolerance`.
pub fn evolve(
    pop: &PopulationState,
    source: &FitnessSource,
    horizon: u64,
    tolerance: f64,
) -> Result<EvolutionReport, GameError> {
    if horizon == 0 {
        return Err(GameError::Parameter("horizon must be at least 1".into()));
    }
    let offset = source.positivity_offset();
    let mut current = pop.clone();
    let mut trajectory = vec![current.shares.clone()];
    let mut converged_at = None;
    for _ in 0..horizon {
        let f = source.fitness(&current.shares, offset);
        let next = replicator_step(&current, &f)?;
        let delta = next
            .shares
            .iter()
            .zip(&current.shares)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trajectory.push(next.shares.clone());
        current = next;
        if delta < tolerance {
            converged_at = Some(current.tick);
            break;
        }
    }
    Ok(EvolutionReport {
        final_shares: current.shares.clone(),
        converged: converged_at.is_some(),
        converged_at,
        trajectory,
        offset,
    })
}

/// Evolutionary stability of `candidate` in a symmetric 2x2 game.
///
/// `candidate` must be a best reply to itself; any alternative best reply
/// `q` must do strictly worse against itself than `candidate` does against
/// `q`. For two actions every alternative best reply lies on the line through
/// `candidate`, which reduces the second condition to the sign of
/// `a00 - a01 - a10 + a11`.
pub fn is_ess(game: &PayoffMatrix2x2, candidate: &MixedStrategy, tol: f64) -> Result<bool, GameError> {
    if candidate.0.len() != 2 {
        return Err(GameError::Dimension { expected: 2, got: candidate.0.len() });
    }
    for i in 0..2 {
        for j in 0..2 {
            if (game.row(i, j) - game.col(j, i)).abs() > 1e-12 {
                return Err(GameError::NotSymmetric);
            }
        }
    }
    let a = |i: usize, j: usize| game.row(i, j);
    let p = &candidate.0;
    let vs_p = |i: usize| a(i, 0) * p[0] + a(i, 1) * p[1];
    let u_pp = p[0] * vs_p(0) + p[1] * vs_p(1);
    let (e0, e1) = (vs_p(0), vs_p(1));
    if u_pp < e0.max(e1) - tol {
        return Ok(false);
    }
    if (e0 - e1).abs() <= tol {
        let d = a(0, 0) - a(0, 1) - a(1, 0) + a(1, 1);
        return Ok(d < -tol);
    }
    // unique pure best reply that the candidate already plays: strict equilibrium
    Ok(true)
}

/// Weights of the strategy fitness
/// `w_e E[recovered] - w_c E[cost] - w_r P(reinfected) - w_m E[ransom]/V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitnessSpec {
    pub effectiveness: f64,
    pub complexity: f64,
    pub reinfection: f64,
    pub money: f64,
}

impl Default for FitnessSpec {
    fn default() -> Self {
        FitnessSpec { effectiveness: 1.0, complexity: 0.3, reinfection: 0.5, money: 1.0 }
    }
}

impl FitnessSpec {
    pub fn validate(&self) -> Result<(), String> {
        let w = [self.effectiveness, self.complexity, self.reinfection, self.money];
        if w.iter().any(|x| !(*x >= 0.0)) {
            return Err("fitness weights must be non-negative".into());
        }
        if !w.iter().any(|x| *x > 0.0) {
            return Err("at least one fitness weight must be positive".into());
        }
        Ok(())
    }
}

/// Per-strategy summary the fitness is computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyStatistics {
    pub mean_recovered: f64,
    pub mean_cost: f64,
    pub reinfection_rate: f64,
    pub mean_ransom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub raw: Vec<f64>,
    pub shifted: Vec<f64>,
    pub shift: f64,
}

pub fn strategy_fitness(stats: &[StrategyStatistics], spec: &FitnessSpec, data_value: f64) -> FitnessReport {
    let raw: Vec<f64> = stats
        .iter()
        .map(|s| {
            spec.effectiveness * s.mean_recovered
                - spec.complexity * s.mean_cost
                - spec.reinfection * s.reinfection_rate
                - spec.money * s.mean_ransom / data_value
        })
        .collect();
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = FITNESS_FLOOR - min;
    FitnessReport {
        shifted: raw.iter().map(|f| f + shift).collect(),
        raw,
        shift,
    }
}
