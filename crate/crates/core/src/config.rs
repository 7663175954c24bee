//! Scenario configuration: TOML in, validated [`ScenarioConfig`] out, and a
//! commented echo that parses back to the same value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::TransferId;
use crate::defense::{AvConfig, FixtureSpec, LevelMapping, Strategy, StrategyParams, StrategySpec};
use crate::game::{build_default_matrix, FitnessSpec, GameParams};
use crate::topology::{AvMix, HostSetup, TopologyKind, TopologySpec};
use crate::world::VirusParams;

/// Seed used when neither the config, the command line nor the environment
/// supplies one.
pub const DEFAULT_SEED: u64 = 42;

pub const NOT_FROM_PAPER: &str = "# default: not from paper";

/// Keys whose defaults are quoted statistics rather than invented knobs.
const PAPER_DEFAULTS: [&str; 5] = [
    "av.behavioral_detect_prob",
    "strategies.behavioral_detect_prob",
    "game.p_full",
    "game.mean_restore",
    "strategies.transfer_id",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    Missing(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{0} is not a numeric config field")]
    BadPath(String),
}

impl ConfigError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Missing(_) => 2,
            ConfigError::Io { .. } => 4,
            ConfigError::Parse(_) | ConfigError::Invalid(_) | ConfigError::BadPath(_) => 3,
        }
    }
}

/// Seeds above `i64::MAX` do not fit a TOML integer and are written as strings.
mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) => match i64::try_from(*x) {
                Ok(i) => s.serialize_i64(i),
                Err(_) => s.serialize_str(&x.to_string()),
            },
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Int(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) => t.parse().map(Some).map_err(de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    #[serde(with = "seed_repr", skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    pub ticks: u64,
    pub files_per_host: usize,
    pub file_size: usize,
    pub shadow_fraction: f64,
    pub initial_snapshot: bool,
    pub out_dir: String,
}

impl Default for WorldSection {
    fn default() -> Self {
        let h = HostSetup::default();
        WorldSection {
            master_seed: None,
            ticks: 200,
            files_per_host: h.files_per_host,
            file_size: h.file_size,
            shadow_fraction: h.shadow_fraction,
            initial_snapshot: h.initial_snapshot,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessSourceKind {
    /// Statistics estimated by running the strategies on a fixture host.
    MonteCarlo,
    /// Statistics read off the qualitative effectiveness and risk levels.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategiesSection {
    pub mc_trials: usize,
    pub fitness_source: FitnessSourceKind,
    /// Re-infection risk of each exploit click.
    pub click_hazard: f64,
    pub fixture_files: usize,
    pub fixture_file_size: usize,
    pub beta_concentration: f64,
    pub fp_prob: f64,
    pub boot_fail_prob: f64,
    pub cleaner_coverage: f64,
    /// Detection rate of the AV used by the removal strategies.
    pub behavioral_detect_prob: f64,
    pub transfer_id: String,
    pub baseline_shadow_fraction: f64,
    pub baseline_trials: usize,
    pub horizon: u64,
    pub tolerance: f64,
    pub levels: LevelMapping,
    pub weights: FitnessSpec,
    /// Per-step complexity overrides keyed by lower-case strategy name.
    pub complexity: BTreeMap<String, Vec<u8>>,
}

impl Default for StrategiesSection {
    fn default() -> Self {
        let p = StrategyParams::default();
        let f = FixtureSpec::default();
        StrategiesSection {
            mc_trials: 1000,
            fitness_source: FitnessSourceKind::MonteCarlo,
            click_hazard: 0.005,
            fixture_files: f.files,
            fixture_file_size: f.file_size,
            beta_concentration: p.beta_concentration,
            fp_prob: p.fp_prob,
            boot_fail_prob: p.boot_fail_prob,
            cleaner_coverage: p.cleaner_coverage,
            behavioral_detect_prob: p.av.behavioral_detect_prob,
            transfer_id: TransferId::zeros().as_str().to_owned(),
            baseline_shadow_fraction: 0.5,
            baseline_trials: 2000,
            horizon: 500,
            tolerance: 1e-9,
            levels: LevelMapping::default(),
            weights: FitnessSpec::default(),
            complexity: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub world: WorldSection,
    pub topology: TopologySpec,
    pub virus: VirusParams,
    pub av: AvMix,
    pub strategies: StrategiesSection,
    pub game: GameParams,
}

fn strategy_key(s: Strategy) -> String {
    s.as_str().to_ascii_lowercase()
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.world.master_seed.unwrap_or(DEFAULT_SEED)
    }

    /// Every violated constraint, each naming its field.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut prob = |name: &str, p: f64| {
            if !(0.0..=1.0).contains(&p) {
                errs.push(format!("{name} = {p} is not a probability in [0, 1]"));
            }
        };
        prob("world.shadow_fraction", self.world.shadow_fraction);
        prob("topology.edge_probability", self.topology.edge_probability);
        let v = &self.virus;
        for (k, p) in [
            ("virus.open_probability", v.open_probability),
            ("virus.email_attachment", v.email_attachment),
            ("virus.download", v.download),
            ("virus.removable_media", v.removable_media),
            ("virus.security_exploit", v.security_exploit),
            ("virus.p2p", v.p2p),
            ("virus.malvertising", v.malvertising),
        ] {
            prob(k, p);
        }
        prob("av.coverage", self.av.coverage);
        prob("av.behavioral_share", self.av.behavioral_share);
        prob("av.behavioral_detect_prob", self.av.behavioral_detect_prob);
        let s = &self.strategies;
        for (k, p) in [
            ("strategies.click_hazard", s.click_hazard),
            ("strategies.fp_prob", s.fp_prob),
            ("strategies.boot_fail_prob", s.boot_fail_prob),
            ("strategies.cleaner_coverage", s.cleaner_coverage),
            ("strategies.behavioral_detect_prob", s.behavioral_detect_prob),
            ("strategies.baseline_shadow_fraction", s.baseline_shadow_fraction),
        ] {
            prob(k, p);
        }
        prob("game.p_full", self.game.p_full);
        prob("game.mean_restore", self.game.mean_restore);
        prob("game.alt_recovery", self.game.alt_recovery);
        prob("game.attacker_decrypt_prob", self.game.attacker_decrypt_prob);

        if self.topology.hosts == 0 {
            errs.push("topology.hosts must be at least 1".into());
        } else if self.topology.patient_zero >= self.topology.hosts {
            errs.push(format!(
                "topology.patient_zero = {} is not below topology.hosts = {}",
                self.topology.patient_zero, self.topology.hosts
            ));
        }
        if self.topology.edge_vector == crate::world::InfectionVector::CloudSync {
            errs.push("topology.edge_vector cannot be CLOUD_SYNC; cloud spread goes through shares".into());
        }
        if self.av.scan_every == 0 {
            errs.push("av.scan_every must be at least 1".into());
        }
        if s.mc_trials == 0 {
            errs.push("strategies.mc_trials must be at least 1".into());
        }
        if s.baseline_trials == 0 {
            errs.push("strategies.baseline_trials must be at least 1".into());
        }
        if s.horizon == 0 {
            errs.push("strategies.horizon must be at least 1".into());
        }
        if !(s.tolerance > 0.0) {
            errs.push("strategies.tolerance must be positive".into());
        }
        if let Err(e) = s.levels.validate() {
            errs.push(format!("strategies.levels: {e}"));
        }
        if let Err(e) = s.weights.validate() {
            errs.push(format!("strategies.weights: {e}"));
        }
        if let Err(e) = TransferId::new(&s.transfer_id) {
            errs.push(format!("strategies.transfer_id: {e}"));
        }
        for key in s.complexity.keys() {
            if !Strategy::ALL.iter().any(|st| strategy_key(*st) == *key) {
                errs.push(format!("strategies.complexity.{key}: unknown strategy"));
            }
        }
        if let Err(e) = self.build_specs() {
            errs.push(e);
        }
        if let Err(e) = self.strategy_params().validate() {
            errs.push(format!("strategies/game: {e}"));
        }
        if let Err(e) = build_default_matrix(&self.game) {
            errs.push(format!("game: {e}"));
        }
        errs
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    fn build_specs(&self) -> Result<Vec<StrategySpec>, String> {
        let mut specs = StrategySpec::defaults(self.strategies.click_hazard);
        for spec in &mut specs {
            let key = strategy_key(spec.strategy);
            if let Some(values) = self.strategies.complexity.get(&key) {
                spec.set_complexities(values)
                    .map_err(|e| format!("strategies.complexity.{key}: {e}"))?;
            }
            spec.validate().map_err(|e| format!("strategy {}: {e}", spec.strategy))?;
        }
        Ok(specs)
    }

    pub fn strategy_specs(&self) -> Vec<StrategySpec> {
        self.build_specs().expect("validated config")
    }

    pub fn strategy_params(&self) -> StrategyParams {
        let s = &self.strategies;
        StrategyParams {
            ransom: self.game.ransom,
            p_full: self.game.p_full,
            mean_restore: self.game.mean_restore,
            beta_concentration: s.beta_concentration,
            fp_prob: s.fp_prob,
            boot_fail_prob: s.boot_fail_prob,
            cleaner_coverage: s.cleaner_coverage,
            cleaner_known_cores: Default::default(),
            av: AvConfig::behavioral(s.behavioral_detect_prob),
            transfer_id: TransferId::new(&s.transfer_id).unwrap_or_else(|_| TransferId::zeros()),
        }
    }

    pub fn fixture(&self) -> FixtureSpec {
        FixtureSpec {
            files: self.strategies.fixture_files,
            file_size: self.strategies.fixture_file_size,
            snapshot: true,
        }
    }

    pub fn host_setup(&self) -> HostSetup {
        HostSetup {
            files_per_host: self.world.files_per_host,
            file_size: self.world.file_size,
            shadow_fraction: self.world.shadow_fraction,
            initial_snapshot: self.world.initial_snapshot,
        }
    }

    fn to_value(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes to a table")
    }

    /// TOML text that parses back to `self`; keys left at an invented
    /// default carry a trailing [`NOT_FROM_PAPER`] marker.
    pub fn echo(&self) -> String {
        let defaults = ScenarioConfig::default().to_value();
        let current = self.to_value();
        let mut out = String::new();
        for section in ["world", "topology", "virus", "av", "strategies", "game"] {
            let table = current.get(section).and_then(|v| v.as_table()).cloned().unwrap_or_default();
            let dtable = defaults.get(section).and_then(|v| v.as_table());
            write_table(&mut out, section, &table, dtable);
        }
        out
    }

    /// Sets the numeric field at a dotted `path` such as `game.ransom`.
    pub fn with_override(&self, path: &str, value: f64) -> Result<Self, ConfigError> {
        let bad = || ConfigError::BadPath(path.to_owned());
        let mut root = self.to_value();
        let mut parts = path.split('.').peekable();
        let mut table = &mut root;
        let leaf = loop {
            let key = parts.next().ok_or_else(bad)?;
            if parts.peek().is_none() {
                break key;
            }
            table = table.get_mut(key).and_then(|v| v.as_table_mut()).ok_or_else(bad)?;
        };
        let slot = table.get_mut(leaf).ok_or_else(bad)?;
        *slot = match slot {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) if value.fract() == 0.0 && value >= 0.0 => toml::Value::Integer(value as i64),
            toml::Value::Integer(_) => {
                return Err(ConfigError::Invalid(vec![format!("{path} needs an integer, got {value}")]))
            }
            _ => return Err(bad()),
        };
        let text = toml::to_string(&root).expect("table serializes");
        ScenarioConfig::from_toml(&text)
    }
}

fn write_table(out: &mut String, name: &str, table: &toml::Table, defaults: Option<&toml::Table>) {
    let _ = writeln!(out, "[{name}]");
    let mut nested = Vec::new();
    for (k, v) in table {
        if let toml::Value::Table(t) = v {
            nested.push((k, t));
            continue;
        }
        let path = format!("{name}.{k}");
        let is_default = defaults.and_then(|d| d.get(k)) == Some(v);
        let flag = is_default && !PAPER_DEFAULTS.contains(&path.as_str());
        let _ = write!(out, "{k} = {v}");
        if flag {
            let _ = write!(out, "  {NOT_FROM_PAPER}");
        }
        out.push('\n');
    }
    out.push('\n');
    for (k, t) in nested {
        let sub = defaults.and_then(|d| d.get(k)).and_then(|v| v.as_table());
        write_table(out, &format!("{name}.{k}"), t, sub);
    }
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    if !path.exists() {
        return Err(ConfigError::Missing(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_toml(&text)
}

/// Star-with-cloud scenario run by `demo`: every host syncs to one share.
pub fn demo_config() -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.topology.kind = TopologyKind::StarCloud;
    c.topology.hosts = 100;
    c.world.ticks = 200;
    c.strategies.mc_trials = 10_000;
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        let c = ScenarioConfig::from_toml("[world]\n[virus]\n[game]\n").unwrap();
        assert_eq!(c, ScenarioConfig::default());
    }

    #[test]
    fn echo_flags_invented_defaults_only() {
        let echo = ScenarioConfig::default().echo();
        let line = |k: &str| echo.lines().find(|l| l.starts_with(&format!("{k} ="))).unwrap().to_owned();
        assert!(line("encryption_batch").ends_with(NOT_FROM_PAPER));
        assert!(line("alt_recovery").ends_with(NOT_FROM_PAPER));
        assert!(!line("p_full").contains(NOT_FROM_PAPER));
        assert!(!line("mean_restore").contains(NOT_FROM_PAPER));
        let mut c = ScenarioConfig::default();
        c.virus.encryption_batch = 3;
        assert!(!c.echo().lines().any(|l| l.starts_with("encryption_batch") && l.contains(NOT_FROM_PAPER)));
        assert!(echo.contains("[strategies.levels]"));
    }

    #[test]
    fn echo_round_trips() {
        let mut c = demo_config();
        c.world.master_seed = Some(u64::MAX);
        c.strategies.complexity.insert("pay_ransom".into(), vec![3, 4]);
        assert_eq!(ScenarioConfig::from_toml(&c.echo()).unwrap(), c);
    }

    #[test]
    fn every_violation_is_named() {
        let text = "[virus]\nopen_probability = 1.5\n[strategies]\nfp_prob = -0.1\n[strategies.levels]\nlow = 0.6\nmedium = 0.5\nhigh = 0.9\n";
        let ConfigError::Invalid(errs) = ScenarioConfig::from_toml(text).unwrap_err() else {
            panic!("expected validation failure");
        };
        assert!(errs.iter().any(|e| e.contains("virus.open_probability")));
        assert!(errs.iter().any(|e| e.contains("strategies.fp_prob")));
        assert!(errs.iter().any(|e| e.contains("strategies.levels")));
    }

    #[test]
    fn ransom_constraint_checked_at_load() {
        let err = ScenarioConfig::from_toml("[game]\nransom = 0.0\n").unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("game"));
    }

    #[test]
    fn unknown_keys_and_bad_syntax_are_rejected() {
        assert!(matches!(ScenarioConfig::from_toml("[virus]\nbogus = 1\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(ScenarioConfig::from_toml("[virus"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn complexity_overrides() {
        let c = ScenarioConfig::from_toml("[strategies.complexity]\nshadow_restore = [4, 4]\n").unwrap();
        let s = &c.strategy_specs()[crate::defense::Strategy::ShadowRestore.index()];
        assert_eq!(s.static_complexity(), 8);
        assert!(ScenarioConfig::from_toml("[strategies.complexity]\nshadow_restore = [4]\n").is_err());
        assert!(ScenarioConfig::from_toml("[strategies.complexity]\nshadow_restore = [11, 1]\n").is_err());
        assert!(ScenarioConfig::from_toml("[strategies.complexity]\nnope = [1]\n").is_err());
    }

    #[test]
    fn overrides_by_path() {
        let c = ScenarioConfig::default();
        let d = c.with_override("game.ransom", 40.0).unwrap();
        assert_eq!(d.game.ransom, 40.0);
        let d = c.with_override("strategies.levels.high", 0.95).unwrap();
        assert_eq!(d.strategies.levels.high, 0.95);
        let d = c.with_override("world.ticks", 7.0).unwrap();
        assert_eq!(d.world.ticks, 7);
        for bad in ["game.nope", "game", "world.out_dir", "world.initial_snapshot", ""] {
            assert!(matches!(c.with_override(bad, 1.0), Err(ConfigError::BadPath(_))), "{bad}");
        }
        assert_eq!(c.with_override("world.ticks", 1.5).unwrap_err().exit_code(), 3);
        assert_eq!(c.with_override("virus.open_probability", 2.0).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn missing_file_is_exit_two() {
        let e = parse_config(Path::new("/definitely/not/here.toml")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    proptest! {
        #[test]
        fn echo_round_trips_random_configs(
            seed in any::<u64>(),
            hosts in 1u32..500,
            open in 0.0f64..=1.0,
            batch in 0usize..50,
            ransom in 1.0f64..60.0,
            trials in 1usize..100_000,
            high in 0.51f64..=1.0,
        ) {
            let mut c = ScenarioConfig::default();
            c.world.master_seed = Some(seed);
            c.topology.hosts = hosts;
            c.virus.open_probability = open;
            c.virus.encryption_batch = batch;
            c.game.ransom = ransom;
            c.strategies.mc_trials = trials;
            c.strategies.levels.high = high;
            prop_assume!(c.validate().is_ok());
            prop_assert_eq!(ScenarioConfig::from_toml(&c.echo()).unwrap(), c);
        }
    }
}
