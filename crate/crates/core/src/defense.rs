//! Antivirus detection and user recovery strategies.
//!
//! A recovery strategy is a pipeline of [`StepSpec`]s. Each step carries a
//! complexity score (0..=10), an optional per-execution re-infection hazard
//! and an [`StepAction`] that does the actual work on the host. Running a
//! strategy against a host yields an [`Outcome`].

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{exploit_check, TransferId};
use crate::rng::rng_from_seed;
use crate::variant::{CoreSignature, LineageTree, SurfaceSignature, VariantId};
use crate::world::{
    EventKind, FileId, FileStatus, HostId, HostState, InfectionVector, SystemFlags, VirusParams, WorldError,
    WorldState,
};

pub const MAX_STEP_COMPLEXITY: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvKind {
    Signature,
    Behavioral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvConfig {
    pub kind: AvKind,
    pub signature_db: HashSet<SurfaceSignature>,
    /// Ignored by signature engines.
    pub behavioral_detect_prob: f64,
    pub live_analysis: bool,
}

/// Detection rate of behavioral engines: 70% of malware evades detection.
pub const DEFAULT_BEHAVIORAL_DETECT_PROB: f64 = 0.30;

impl AvConfig {
    pub fn signature(db: HashSet<SurfaceSignature>) -> Self {
        AvConfig {
            kind: AvKind::Signature,
            signature_db: db,
            behavioral_detect_prob: DEFAULT_BEHAVIORAL_DETECT_PROB,
            live_analysis: false,
        }
    }

    pub fn behavioral(detect_prob: f64) -> Self {
        AvConfig {
            kind: AvKind::Behavioral,
            signature_db: HashSet::new(),
            behavioral_detect_prob: detect_prob,
            live_analysis: true,
        }
    }
}

/// Returns the active variants on `host` that `av` flags.
///
/// Signature engines match surface signatures exactly. Behavioral engines
/// draw once per distinct core per scan, so every member of a lineage shares
/// one detectability; without live analysis they fall back to signatures.
pub fn scan<R: Rng + ?Sized>(
    host: &HostState,
    av: &AvConfig,
    lineage: &LineageTree,
    rng: &mut R,
) -> BTreeSet<VariantId> {
    let by_signature = || {
        host.active_infections
            .iter()
            .copied()
            .filter(|id| {
                lineage
                    .get(*id)
                    .is_some_and(|v| av.signature_db.contains(&v.surface_signature))
            })
            .collect()
    };
    match av.kind {
        AvKind::Signature => by_signature(),
        AvKind::Behavioral if !av.live_analysis => by_signature(),
        AvKind::Behavioral => {
            let mut cores: Vec<CoreSignature> = host
                .active_infections
                .iter()
                .filter_map(|id| lineage.get(*id).map(|v| v.core_signature))
                .collect();
            cores.sort_unstable();
            cores.dedup();
            let flagged: HashSet<CoreSignature> = cores
                .into_iter()
                .filter(|_| rng.random_bool(av.behavioral_detect_prob))
                .collect();
            host.active_infections
                .iter()
                .copied()
                .filter(|id| lineage.get(*id).is_some_and(|v| flagged.contains(&v.core_signature)))
                .collect()
        }
    }
}

/// Deletes (does not decrypt) every file owned by a detected variant.
/// Flags go back to benign once nothing active remains.
pub fn remove_detected(host: &mut HostState, detected: &BTreeSet<VariantId>) -> usize {
    if detected.is_empty() {
        return 0;
    }
    let before = host.files.len();
    host.files
        .retain(|f| !f.owner().is_some_and(|v| detected.contains(&v)));
    host.refresh_infections();
    if !host.is_infected() {
        host.flags = SystemFlags::BENIGN;
    }
    before - host.files.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        }
    }
}

/// Numeric reading of the qualitative low/medium/high scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelMapping {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl Default for LevelMapping {
    fn default() -> Self {
        LevelMapping { low: 0.25, medium: 0.50, high: 0.85 }
    }
}

impl LevelMapping {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [("low", self.low), ("medium", self.medium), ("high", self.high)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("level {name} = {p} is not a probability"));
            }
        }
        if !(self.low < self.medium && self.medium < self.high) {
            return Err("level mapping must be strictly increasing low < medium < high".into());
        }
        Ok(())
    }

    pub fn level_to_prob(&self, level: Level) -> f64 {
        match level {
            Level::Low => self.low,
            Level::Medium => self.medium,
            Level::High => self.high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    PayRansom,
    ExploitDecrypt,
    ShadowRestore,
    AvRemove,
    AvCleanRecover,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::PayRansom,
        Strategy::ExploitDecrypt,
        Strategy::ShadowRestore,
        Strategy::AvRemove,
        Strategy::AvCleanRecover,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::PayRansom => "PAY_RANSOM",
            Strategy::ExploitDecrypt => "EXPLOIT_DECRYPT",
            Strategy::ShadowRestore => "SHADOW_RESTORE",
            Strategy::AvRemove => "AV_REMOVE",
            Strategy::AvCleanRecover => "AV_CLEAN_RECOVER",
        }
    }

    pub fn index(self) -> usize {
        Strategy::ALL.iter().position(|s| *s == self).expect("listed")
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepAction {
    /// Complexity only.
    Prepare,
    /// Reboot into safe mode with networking; `fallible` boots can fail
    /// when the virus launches anyway.
    SafeModeBoot { fallible: bool },
    PayRansom,
    EnterTransferId,
    /// Executed once per encrypted file.
    ClickFile,
    RestoreSnapshot,
    Scan,
    Remove,
    CleanerRecover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub name: String,
    pub action: StepAction,
    pub complexity: u8,
    pub reinfection_hazard: f64,
}

impl StepSpec {
    pub fn new(name: &str, action: StepAction, complexity: u8) -> Self {
        StepSpec {
            name: name.to_owned(),
            action,
            complexity,
            reinfection_hazard: 0.0,
        }
    }

    pub fn with_hazard(mut self, hazard: f64) -> Self {
        self.reinfection_hazard = hazard;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub strategy: Strategy,
    pub steps: Vec<StepSpec>,
    pub effectiveness: Level,
    pub reinfection_risk: Level,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("{0}: strategy has no steps")]
    NoSteps(Strategy),
    #[error("{strategy}: step '{step}' complexity {complexity} exceeds {MAX_STEP_COMPLEXITY}")]
    Complexity { strategy: Strategy, step: String, complexity: u8 },
    #[error("{strategy}: step '{step}' hazard {hazard} is not a probability")]
    Hazard { strategy: Strategy, step: String, hazard: f64 },
    #[error("complexity list for {strategy} has {got} entries, expected {expected}")]
    ComplexityCount { strategy: Strategy, got: usize, expected: usize },
}

impl StrategySpec {
    /// The default pipeline for `strategy`. Step complexities and levels are
    /// calibration defaults; `click_hazard` is the per-file re-infection risk
    /// of the exploit route.
    pub fn default_for(strategy: Strategy, click_hazard: f64) -> Self {
        use StepAction as A;
        let (steps, effectiveness, reinfection_risk) = match strategy {
            Strategy::PayRansom => (
                vec![
                    StepSpec::new("acquire payment currency", A::Prepare, 1),
                    StepSpec::new("pay ransom", A::PayRansom, 1),
                ],
                Level::Medium,
                Level::High,
            ),
            Strategy::ExploitDecrypt => (
                vec![
                    StepSpec::new("open ransom payment screen", A::Prepare, 2),
                    StepSpec::new("enter 64-zero transfer id", A::EnterTransferId, 3),
                    StepSpec::new("click every encrypted file", A::ClickFile, 2).with_hazard(click_hazard),
                ],
                Level::Medium,
                Level::High,
            ),
            Strategy::ShadowRestore => (
                vec![
                    StepSpec::new("boot into safe mode with networking", A::SafeModeBoot { fallible: false }, 2),
                    StepSpec::new("restore newest shadow copy", A::RestoreSnapshot, 3),
                ],
                Level::High,
                Level::Medium,
            ),
            Strategy::AvRemove => (
                vec![
                    StepSpec::new("boot into safe mode with networking", A::SafeModeBoot { fallible: true }, 2),
                    StepSpec::new("run antivirus scan", A::Scan, 1),
                    StepSpec::new("quarantine or delete detections", A::Remove, 1),
                ],
                Level::Low,
                Level::Low,
            ),
            Strategy::AvCleanRecover => (
                vec![
                    StepSpec::new("boot into safe mode with networking", A::SafeModeBoot { fallible: true }, 2),
                    StepSpec::new("install antivirus and cleaner", A::Prepare, 1),
                    StepSpec::new("run antivirus scan", A::Scan, 1),
                    StepSpec::new("run cleaner/recoverer", A::CleanerRecover, 1),
                    StepSpec::new("quarantine or delete detections", A::Remove, 1),
                ],
                Level::High,
                Level::Low,
            ),
        };
        StrategySpec { strategy, steps, effectiveness, reinfection_risk }
    }

    pub fn defaults(click_hazard: f64) -> Vec<StrategySpec> {
        Strategy::ALL
            .iter()
            .map(|&s| StrategySpec::default_for(s, click_hazard))
            .collect()
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.steps.is_empty() {
            return Err(SpecError::NoSteps(self.strategy));
        }
        for s in &self.steps {
            if s.complexity > MAX_STEP_COMPLEXITY {
                return Err(SpecError::Complexity {
                    strategy: self.strategy,
                    step: s.name.clone(),
                    complexity: s.complexity,
                });
            }
            if !(0.0..=1.0).contains(&s.reinfection_hazard) {
                return Err(SpecError::Hazard {
                    strategy: self.strategy,
                    step: s.name.clone(),
                    hazard: s.reinfection_hazard,
                });
            }
        }
        Ok(())
    }

    /// Replaces step complexities in order.
    pub fn set_complexities(&mut self, values: &[u8]) -> Result<(), SpecError> {
        if values.len() != self.steps.len() {
            return Err(SpecError::ComplexityCount {
                strategy: self.strategy,
                got: values.len(),
                expected: self.steps.len(),
            });
        }
        for (s, &c) in self.steps.iter_mut().zip(values) {
            s.complexity = c;
        }
        self.validate()
    }

    /// Sum of step complexities with every step executed once.
    pub fn static_complexity(&self) -> u32 {
        self.steps.iter().map(|s| u32::from(s.complexity)).sum()
    }
}

/// Knobs consumed while executing strategies.
#[derive(Debug, Clone)]
pub struct StrategyParams {
    pub ransom: f64,
    /// Chance that paying returns every file.
    pub p_full: f64,
    /// Unconditional mean recovered fraction after paying.
    pub mean_restore: f64,
    /// Beta concentration (alpha + beta) of the partial-recovery draw.
    pub beta_concentration: f64,
    pub fp_prob: f64,
    pub boot_fail_prob: f64,
    /// Chance per run that the cleaner's database covers the infecting family.
    pub cleaner_coverage: f64,
    pub cleaner_known_cores: HashSet<CoreSignature>,
    pub av: AvConfig,
    pub transfer_id: TransferId,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            ransom: 20.0,
            p_full: 0.08,
            mean_restore: 0.65,
            beta_concentration: 6.0,
            fp_prob: 0.01,
            boot_fail_prob: 0.05,
            cleaner_coverage: 0.75,
            cleaner_known_cores: HashSet::new(),
            av: AvConfig::behavioral(DEFAULT_BEHAVIORAL_DETECT_PROB),
            transfer_id: TransferId::zeros(),
        }
    }
}

impl StrategyParams {
    /// Mean of the partial-recovery Beta so that the unconditional mean
    /// equals `mean_restore`.
    pub fn partial_mean(&self) -> f64 {
        if self.p_full >= 1.0 {
            return 1.0;
        }
        (self.mean_restore - self.p_full) / (1.0 - self.p_full)
    }

    pub fn validate(&self) -> Result<(), String> {
        let m = self.partial_mean();
        if self.p_full < 1.0 && !(m > 0.0 && m < 1.0) {
            return Err(format!(
                "mean_restore {} and p_full {} leave no valid partial-recovery mean",
                self.mean_restore, self.p_full
            ));
        }
        if self.beta_concentration <= 0.0 {
            return Err("beta_concentration must be positive".into());
        }
        if self.ransom < 0.0 {
            return Err("ransom must be non-negative".into());
        }
        Ok(())
    }

    fn sample_paid_recovery<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, bool) {
        if rng.random_bool(self.p_full.clamp(0.0, 1.0)) {
            return (1.0, true);
        }
        let m = self.partial_mean();
        let k = self.beta_concentration;
        let beta = Beta::new(m * k, (1.0 - m) * k).expect("validated beta parameters");
        (beta.sample(rng), false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub strategy: Strategy,
    pub recovered_fraction: f64,
    pub full_recovery: bool,
    pub malware_removed: bool,
    pub reinfected: bool,
    pub ransom_paid: f64,
    pub total_complexity: u32,
    pub steps_executed: u32,
    pub aborted: bool,
}

impl Outcome {
    /// Executed complexity normalized to [0, 1].
    pub fn normalized_cost(&self) -> f64 {
        if self.steps_executed == 0 {
            return 0.0;
        }
        f64::from(self.total_complexity) / (f64::from(MAX_STEP_COMPLEXITY) * f64::from(self.steps_executed))
    }
}

pub const OUTCOME_CSV_HEADER: &str =
    "trial,strategy,recovered_fraction,malware_removed,reinfected,ransom_paid,total_complexity";

pub fn outcome_csv_row(trial: usize, o: &Outcome) -> String {
    format!(
        "{},{},{:.6},{},{},{},{}",
        trial, o.strategy, o.recovered_fraction, o.malware_removed, o.reinfected, o.ransom_paid, o.total_complexity
    )
}

fn restore_flags_if_clean(world: &mut WorldState, host: HostId) {
    let h = &mut world.hosts[host.0 as usize];
    if !h.is_infected() && !h.flags.is_benign() {
        h.flags = SystemFlags::BENIGN;
        world.log(EventKind::FlagsRestored, Some(host), None, None, String::new());
    }
}

/// Turns one encrypted document back into its clean original.
fn decrypt_in_place(world: &mut WorldState, host: HostId, idx: usize) -> bool {
    let file = &world.hosts[host.0 as usize].files[idx];
    let Some(clean) = world.decode_file(file) else {
        return false;
    };
    let owner = file.owner();
    let f = &mut world.hosts[host.0 as usize].files[idx];
    f.content = clean;
    if let Some(stripped) = f.name.strip_suffix(".exe") {
        f.name = stripped.to_owned();
    }
    f.status = FileStatus::Clean;
    f.visible_extension = true;
    let fid = f.id;
    world.hosts[host.0 as usize].refresh_infections();
    world.log(EventKind::Decrypt, Some(host), owner, None, format!("file={}", fid.0));
    true
}

fn encrypted_indices(host: &HostState) -> Vec<usize> {
    host.files
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_encrypted_document())
        .map(|(i, _)| i)
        .collect()
}

/// Executes `spec` on `host_id`.
pub fn apply_strategy<R: Rng + ?Sized>(
    world: &mut WorldState,
    host_id: HostId,
    spec: &StrategySpec,
    params: &StrategyParams,
    rng: &mut R,
) -> Result<Outcome, WorldError> {
    let host = world.host(host_id)?;
    let encrypted_at_start: HashSet<FileId> = host.encrypted_documents().map(|f| f.id).collect();
    let clean_at_start: HashSet<FileId> = host
        .files
        .iter()
        .filter(|f| !f.is_infected())
        .map(|f| f.id)
        .collect();
    let uses_shadow = spec.steps.iter().any(|s| s.action == StepAction::RestoreSnapshot);
    if uses_shadow && !host.shadow_enabled {
        return Err(WorldError::StrategyUnavailable("shadow copies are disabled on this host"));
    }

    let mut out = Outcome {
        strategy: spec.strategy,
        recovered_fraction: 0.0,
        full_recovery: false,
        malware_removed: false,
        reinfected: false,
        ransom_paid: 0.0,
        total_complexity: 0,
        steps_executed: 0,
        aborted: false,
    };
    let mut paid_fraction: Option<f64> = None;
    let mut detected = BTreeSet::new();

    'pipeline: for step in &spec.steps {
        if step.action == StepAction::ClickFile {
            for idx in encrypted_indices(&world.hosts[host_id.0 as usize]) {
                out.total_complexity += u32::from(step.complexity);
                out.steps_executed += 1;
                if step.reinfection_hazard > 0.0 && rng.random_bool(step.reinfection_hazard) {
                    let owner = world.hosts[host_id.0 as usize].files[idx]
                        .owner()
                        .expect("encrypted document has an owner");
                    world.infect_host(host_id, owner, InfectionVector::SecurityExploit, rng)?;
                    out.reinfected = true;
                    out.aborted = true;
                    break 'pipeline;
                }
                decrypt_in_place(world, host_id, idx);
            }
            continue;
        }

        out.total_complexity += u32::from(step.complexity);
        out.steps_executed += 1;
        if step.reinfection_hazard > 0.0 && rng.random_bool(step.reinfection_hazard) {
            let parent = world.hosts[host_id.0 as usize]
                .active_infections
                .iter()
                .next()
                .copied()
                .unwrap_or(world.lineage.root().id);
            world.infect_host(host_id, parent, InfectionVector::SecurityExploit, rng)?;
            out.reinfected = true;
            out.aborted = true;
            break;
        }
        match step.action {
            StepAction::Prepare | StepAction::ClickFile => {}
            StepAction::SafeModeBoot { fallible } => {
                if fallible && rng.random_bool(params.boot_fail_prob) {
                    out.aborted = true;
                    break;
                }
            }
            StepAction::PayRansom => {
                out.ransom_paid = params.ransom;
                let (fraction, full) = params.sample_paid_recovery(rng);
                out.full_recovery = full;
                paid_fraction = Some(fraction);
                let idxs = encrypted_indices(&world.hosts[host_id.0 as usize]);
                let k = if full {
                    idxs.len()
                } else {
                    (fraction * idxs.len() as f64).round() as usize
                };
                for &idx in idxs.iter().take(k) {
                    decrypt_in_place(world, host_id, idx);
                }
            }
            StepAction::EnterTransferId => {
                if !exploit_check(&params.transfer_id) {
                    out.aborted = true;
                    break;
                }
            }
            StepAction::RestoreSnapshot => {
                let newest = world.hosts[host_id.0 as usize].shadow_snapshots.last().map(|s| s.id);
                if let Some(snap) = newest {
                    world.restore_snapshot(host_id, snap)?;
                }
            }
            StepAction::Scan => {
                let h = &world.hosts[host_id.0 as usize];
                detected = scan(h, &params.av, &world.lineage, rng);
            }
            StepAction::Remove => {
                world.quarantine(host_id, &detected);
            }
            StepAction::CleanerRecover => {
                cleaner_pass(world, host_id, params, &clean_at_start, rng);
            }
        }
    }

    restore_flags_if_clean(world, host_id);
    let h = &world.hosts[host_id.0 as usize];
    out.malware_removed = !h.is_infected();
    out.recovered_fraction = match paid_fraction {
        Some(f) => f,
        None if encrypted_at_start.is_empty() => 1.0,
        None => {
            let restored = h
                .files
                .iter()
                .filter(|f| encrypted_at_start.contains(&f.id) && !f.is_infected())
                .count();
            restored as f64 / encrypted_at_start.len() as f64
        }
    };
    if paid_fraction.is_none() && !encrypted_at_start.is_empty() {
        out.full_recovery = out.recovered_fraction >= 1.0;
    }
    Ok(out)
}

/// Decrypts documents and wipes executables of lineages the cleaner knows;
/// may also delete files that were clean to begin with.
fn cleaner_pass<R: Rng + ?Sized>(
    world: &mut WorldState,
    host_id: HostId,
    params: &StrategyParams,
    clean_at_start: &HashSet<FileId>,
    rng: &mut R,
) {
    let mut known = params.cleaner_known_cores.clone();
    if rng.random_bool(params.cleaner_coverage) {
        let h = &world.hosts[host_id.0 as usize];
        known.extend(
            h.active_infections
                .iter()
                .filter_map(|id| world.lineage.get(*id).map(|v| v.core_signature)),
        );
    }
    let is_known = |world: &WorldState, id: VariantId| {
        world.lineage.get(id).is_some_and(|v| known.contains(&v.core_signature))
    };

    for idx in encrypted_indices(&world.hosts[host_id.0 as usize]) {
        let owner = world.hosts[host_id.0 as usize].files[idx].owner().expect("encrypted");
        if is_known(world, owner) {
            decrypt_in_place(world, host_id, idx);
        }
    }
    let wipe: BTreeSet<VariantId> = world.hosts[host_id.0 as usize]
        .dropped_executables()
        .filter_map(|f| f.owner())
        .filter(|&v| is_known(world, v))
        .collect();
    world.quarantine(host_id, &wipe);

    if params.fp_prob > 0.0 {
        let h = &mut world.hosts[host_id.0 as usize];
        let mut lost = Vec::new();
        h.files.retain(|f| {
            let hit = clean_at_start.contains(&f.id) && rng.random_bool(params.fp_prob);
            if hit {
                lost.push(f.id);
            }
            !hit
        });
        for fid in lost {
            world.log(EventKind::FalsePositive, Some(host_id), None, None, format!("file={}", fid.0));
        }
    }
}

/// Shape of the single-host world strategies are evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub files: usize,
    pub file_size: usize,
    /// Take a shadow copy before the infection.
    pub snapshot: bool,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec { files: 20, file_size: 64, snapshot: true }
    }
}

/// A host that was infected and left running until every document was
/// encrypted.
#[derive(Debug, Clone)]
pub struct RecoveryFixture {
    pub world: WorldState,
    pub host: HostId,
    pub originals: Vec<(FileId, Vec<u8>)>,
}

impl RecoveryFixture {
    pub fn build(spec: FixtureSpec, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut world = WorldState::new(seed, VirusParams::default());
        let host = world.add_host(true, None);
        let mut originals = Vec::with_capacity(spec.files);
        for i in 0..spec.files {
            let content: Vec<u8> = (0..spec.file_size).map(|_| rng.random()).collect();
            let id = world
                .add_file(host, format!("document{i:04}.dat"), content.clone())
                .expect("host exists");
            originals.push((id, content));
        }
        if spec.snapshot {
            world.take_snapshot(host).expect("shadow enabled");
        }
        let root = world.lineage.root().id;
        world
            .infect_host(host, root, InfectionVector::EmailAttachment, &mut rng)
            .expect("host exists");
        while world.hosts[host.0 as usize].files.iter().any(|f| !f.is_infected()) {
            world.step(&mut rng);
        }
        RecoveryFixture { world, host, originals }
    }

    /// Fraction of the original documents present with their original bytes.
    pub fn data_recovered(&self, world: &WorldState) -> f64 {
        if self.originals.is_empty() {
            return 1.0;
        }
        let h = &world.hosts[self.host.0 as usize];
        let ok = self
            .originals
            .iter()
            .filter(|(id, content)| {
                h.files
                    .iter()
                    .any(|f| f.id == *id && !f.is_infected() && f.content == *content)
            })
            .count();
        ok as f64 / self.originals.len() as f64
    }
}

/// Result of one victim working through the non-payment routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub data_recovered: f64,
    pub had_snapshot: bool,
    pub strategies_tried: Vec<Strategy>,
    pub reinfected: bool,
}

/// Non-payment recovery: shadow copies when the victim kept them, then the
/// antivirus cleaner, then the transfer-id exploit for whatever is left.
pub fn baseline_recovery<R: Rng + ?Sized>(
    with_snapshot: &RecoveryFixture,
    without_snapshot: &RecoveryFixture,
    shadow_fraction: f64,
    specs: &[StrategySpec],
    params: &StrategyParams,
    rng: &mut R,
) -> BaselineOutcome {
    let had_snapshot = rng.random_bool(shadow_fraction);
    let fixture = if had_snapshot { with_snapshot } else { without_snapshot };
    let mut world = fixture.world.clone();
    let host = fixture.host;
    let spec_of = |s: Strategy| specs.iter().find(|x| x.strategy == s).expect("all strategies present");
    let mut tried = Vec::new();
    let mut reinfected = false;
    let order = [Strategy::ShadowRestore, Strategy::AvCleanRecover, Strategy::ExploitDecrypt];
    for s in order {
        let h = &world.hosts[host.0 as usize];
        if h.encrypted_documents().next().is_none() || reinfected {
            break;
        }
        if s == Strategy::ShadowRestore && h.shadow_snapshots.is_empty() {
            continue;
        }
        tried.push(s);
        let o = apply_strategy(&mut world, host, spec_of(s), params, rng).expect("fixture host exists");
        reinfected |= o.reinfected;
    }
    BaselineOutcome {
        data_recovered: fixture.data_recovered(&world),
        had_snapshot,
        strategies_tried: tried,
        reinfected,
    }
}
