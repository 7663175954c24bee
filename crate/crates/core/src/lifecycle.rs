//! Trait profiles and infection lifecycles, and how closely two viruses
//! match on them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LifecycleStage {
    Attachment,
    Penetration,
    Unpacking,
    Replication,
    SpreadRelease,
    Dormancy,
}

impl LifecycleStage {
    pub const ALL: [LifecycleStage; 6] = [
        LifecycleStage::Attachment,
        LifecycleStage::Penetration,
        LifecycleStage::Unpacking,
        LifecycleStage::Replication,
        LifecycleStage::SpreadRelease,
        LifecycleStage::Dormancy,
    ];
}

impl fmt::Display for LifecycleStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LifecycleStage::Attachment => "ATTACHMENT",
            LifecycleStage::Penetration => "PENETRATION",
            LifecycleStage::Unpacking => "UNPACKING",
            LifecycleStage::Replication => "REPLICATION",
            LifecycleStage::SpreadRelease => "SPREAD_RELEASE",
            LifecycleStage::Dormancy => "DORMANCY",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("{organism}: lifecycle must contain ATTACHMENT and REPLICATION")]
    MissingStage { organism: String },
    #[error("{organism}: stage {stage} is out of canonical order")]
    Order { organism: String, stage: LifecycleStage },
    #[error("profile parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: LifecycleStage,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleModel {
    organism: String,
    stages: Vec<StageEntry>,
}

impl LifecycleModel {
    pub fn new(organism: impl Into<String>, stages: Vec<(LifecycleStage, String)>) -> Result<Self, ProfileError> {
        let organism = organism.into();
        let stages: Vec<StageEntry> = stages
            .into_iter()
            .map(|(stage, label)| StageEntry { stage, label })
            .collect();
        for w in stages.windows(2) {
            if w[1].stage < w[0].stage {
                return Err(ProfileError::Order { organism, stage: w[1].stage });
            }
        }
        let has = |s| stages.iter().any(|e| e.stage == s);
        if !has(LifecycleStage::Attachment) || !has(LifecycleStage::Replication) {
            return Err(ProfileError::MissingStage { organism });
        }
        Ok(LifecycleModel { organism, stages })
    }

    pub fn organism(&self) -> &str {
        &self.organism
    }

    pub fn stages(&self) -> &[StageEntry] {
        &self.stages
    }

    pub fn contains(&self, stage: LifecycleStage) -> bool {
        self.stages.iter().any(|e| e.stage == stage)
    }
}

/// Traits both viruses are taken to share.
pub const CORE_TRAITS: [&str; 9] = [
    "self_replication_exponential_growth",
    "host_manipulation_for_self_protection",
    "full_host_function_takeover",
    "host_type_specificity",
    "parasitic_code_embedding",
    "contact_spread",
    "mutable_wrapper_stable_core",
    "rapid_mutation_incl_external_help",
    "stealth_hard_to_eliminate",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraitVector(BTreeMap<String, bool>);

impl TraitVector {
    /// All core traits present and false.
    pub fn new() -> Self {
        TraitVector(CORE_TRAITS.iter().map(|t| (t.to_string(), false)).collect())
    }

    pub fn all_core(value: bool) -> Self {
        TraitVector(CORE_TRAITS.iter().map(|t| (t.to_string(), value)).collect())
    }

    pub fn set(&mut self, name: &str, value: bool) -> &mut Self {
        self.0.insert(name.to_owned(), value);
        self
    }

    pub fn get(&self, name: &str) -> bool {
        self.0.get(name).copied().unwrap_or(false)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Keeps only the named traits.
    pub fn restricted_to(&self, names: &[&str]) -> Self {
        TraitVector(names.iter().map(|n| (n.to_string(), self.get(n))).collect())
    }
}

impl Default for TraitVector {
    fn default() -> Self {
        Self::new()
    }
}

/// Jaccard index over true traits; 1 when neither vector has any.
pub fn similarity(a: &TraitVector, b: &TraitVector) -> f64 {
    let names: std::collections::BTreeSet<&str> = a.names().chain(b.names()).collect();
    let (mut both, mut either) = (0usize, 0usize);
    for n in names {
        let (x, y) = (a.get(n), b.get(n));
        both += usize::from(x && y);
        either += usize::from(x || y);
    }
    if either == 0 {
        1.0
    } else {
        both as f64 / either as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePair {
    pub stage: LifecycleStage,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub mapping: Vec<StagePair>,
    pub lcs_len: usize,
    pub score: f64,
}

/// Longest common subsequence of two stage sequences, returned as index
/// pairs in increasing order.
pub fn lcs_pairs<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if a[i] == b[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(dp[0][0]);
    while i < n && j < m {
        if a[i] == b[j] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

pub fn align_lifecycles(a: &LifecycleModel, b: &LifecycleModel) -> Alignment {
    let sa: Vec<LifecycleStage> = a.stages.iter().map(|e| e.stage).collect();
    let sb: Vec<LifecycleStage> = b.stages.iter().map(|e| e.stage).collect();
    let pairs = lcs_pairs(&sa, &sb);
    let mapping = pairs
        .iter()
        .map(|&(i, j)| StagePair {
            stage: sa[i],
            left: a.stages[i].label.clone(),
            right: b.stages[j].label.clone(),
        })
        .collect();
    let denom = sa.len().max(sb.len());
    Alignment {
        lcs_len: pairs.len(),
        score: if denom == 0 { 1.0 } else { pairs.len() as f64 / denom as f64 },
        mapping,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirusProfile {
    pub lifecycle: LifecycleModel,
    pub traits: TraitVector,
}

/// Built-in profiles: the ransomware and bacteriophage phi6.
pub fn builtin_profiles() -> (VirusProfile, VirusProfile) {
    use LifecycleStage::*;
    let virlock = LifecycleModel::new(
        "Virlock",
        vec![
            (Attachment, "malicious attachment opened".into()),
            (Penetration, "execution".into()),
            (Unpacking, "dropper deploys 3 executables".into()),
            (Replication, "file encryption/embedding".into()),
            (SpreadRelease, "cloud sync".into()),
        ],
    )
    .expect("builtin lifecycle is well formed");
    let phi6 = LifecycleModel::new(
        "phi6",
        vec![
            (Attachment, "P3 binding".into()),
            (Penetration, "virion entry".into()),
            (Unpacking, "uncoating".into()),
            (Replication, "genome replication/translation".into()),
            (SpreadRelease, "lysis".into()),
            (Dormancy, "prophage".into()),
        ],
    )
    .expect("builtin lifecycle is well formed");

    let mut vt = TraitVector::all_core(true);
    vt.set("monetary_ransom_objective", true)
        .set("cloud_network_spread", true)
        .set("requires_living_host_cell", false)
        .set("segmented_genome", false)
        .set("lipid_membrane", false);
    let mut pt = TraitVector::all_core(true);
    pt.set("monetary_ransom_objective", false)
        .set("cloud_network_spread", false)
        .set("requires_living_host_cell", true)
        .set("segmented_genome", true)
        .set("lipid_membrane", true);
    (
        VirusProfile { lifecycle: virlock, traits: vt },
        VirusProfile { lifecycle: phi6, traits: pt },
    )
}

/// On-disk profile:
///
/// ```toml
/// organism = "phi6"
/// stages = [["ATTACHMENT", "P3 binding"], ["REPLICATION", "genome replication"]]
/// [traits]
/// contact_spread = true
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    organism: String,
    stages: Vec<(LifecycleStage, String)>,
    #[serde(default)]
    traits: BTreeMap<String, bool>,
}

impl VirusProfile {
    pub fn from_toml(text: &str) -> Result<Self, ProfileError> {
        let f: ProfileFile = toml::from_str(text).map_err(|e| ProfileError::Parse(e.to_string()))?;
        let lifecycle = LifecycleModel::new(f.organism, f.stages)?;
        let mut traits = TraitVector::new();
        for (k, v) in &f.traits {
            traits.set(k, *v);
        }
        Ok(VirusProfile { lifecycle, traits })
    }

    pub fn to_toml(&self) -> String {
        let f = ProfileFile {
            organism: self.lifecycle.organism.clone(),
            stages: self
                .lifecycle
                .stages
                .iter()
                .map(|e| (e.stage, e.label.clone()))
                .collect(),
            traits: self.traits.0.clone(),
        };
        toml::to_string(&f).expect("profile serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitRow {
    pub name: String,
    pub left: bool,
    pub right: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub left: String,
    pub right: String,
    pub trait_table: Vec<TraitRow>,
    pub shared: Vec<String>,
    pub only_left: Vec<String>,
    pub only_right: Vec<String>,
    pub core_similarity: f64,
    pub full_similarity: f64,
    pub alignment: Alignment,
}

pub fn correlate(a: &VirusProfile, b: &VirusProfile) -> CorrelationReport {
    let names: std::collections::BTreeSet<&str> = a.traits.names().chain(b.traits.names()).collect();
    let mut table = Vec::new();
    let (mut shared, mut only_left, mut only_right) = (Vec::new(), Vec::new(), Vec::new());
    for n in names {
        let (l, r) = (a.traits.get(n), b.traits.get(n));
        table.push(TraitRow { name: n.to_owned(), left: l, right: r });
        match (l, r) {
            (true, true) => shared.push(n.to_owned()),
            (true, false) => only_left.push(n.to_owned()),
            (false, true) => only_right.push(n.to_owned()),
            (false, false) => {}
        }
    }
    CorrelationReport {
        left: a.lifecycle.organism.clone(),
        right: b.lifecycle.organism.clone(),
        trait_table: table,
        shared,
        only_left,
        only_right,
        core_similarity: similarity(&a.traits.restricted_to(&CORE_TRAITS), &b.traits.restricted_to(&CORE_TRAITS)),
        full_similarity: similarity(&a.traits, &b.traits),
        alignment: align_lifecycles(&a.lifecycle, &b.lifecycle),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerates every subsequence of `a` and keeps the longest one that is
    /// also a subsequence of `b`.
    fn brute_force_lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
        let is_subseq = |idx: &[usize]| {
            let mut j = 0;
            for &i in idx {
                while j < b.len() && b[j] != a[i] {
                    j += 1;
                }
                if j == b.len() {
                    return false;
                }
                j += 1;
            }
            true
        };
        (0u32..(1 << a.len()))
            .map(|mask| (0..a.len()).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>())
            .filter(|idx| is_subseq(idx))
            .map(|idx| idx.len())
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn builtins_share_all_core_traits() {
        let (v, p) = builtin_profiles();
        for t in CORE_TRAITS {
            assert!(v.traits.get(t) && p.traits.get(t), "{t}");
        }
        assert!(p.lifecycle.contains(LifecycleStage::Dormancy));
        assert!(!v.lifecycle.contains(LifecycleStage::Dormancy));
        for m in [&v.lifecycle, &p.lifecycle] {
            assert!(m.contains(LifecycleStage::Attachment) && m.contains(LifecycleStage::Replication));
        }
    }

    #[test]
    fn builtin_scores() {
        let (v, p) = builtin_profiles();
        let r = correlate(&v, &p);
        assert_eq!(r.core_similarity, 1.0);
        assert!(r.full_similarity < 1.0);
        assert_eq!(r.alignment.lcs_len, 5);
        assert_eq!(r.alignment.score, 5.0 / 6.0);
        let stages: Vec<LifecycleStage> = v.lifecycle.stages().iter().map(|e| e.stage).collect();
        let other: Vec<LifecycleStage> = p.lifecycle.stages().iter().map(|e| e.stage).collect();
        assert_eq!(brute_force_lcs(&stages, &other), 5);
        assert_eq!(r.alignment.mapping[0].right, "P3 binding");
    }

    #[test]
    fn self_alignment_is_identity() {
        let (v, _) = builtin_profiles();
        let a = align_lifecycles(&v.lifecycle, &v.lifecycle);
        assert_eq!(a.score, 1.0);
        assert!(a.mapping.iter().all(|p| p.left == p.right));
    }

    #[test]
    fn similarity_edge_cases() {
        let mut a = TraitVector::new();
        let b = TraitVector::new();
        assert_eq!(similarity(&a, &b), 1.0);
        a.set("contact_spread", true);
        let mut c = TraitVector::new();
        c.set("host_type_specificity", true);
        assert_eq!(similarity(&a, &c), 0.0);
        assert_eq!(similarity(&a, &a), 1.0);
        // union of universes, missing = false
        let mut d = TraitVector::new();
        d.set("contact_spread", true).set("extra", true);
        assert_eq!(similarity(&a, &d), 0.5);
    }

    #[test]
    fn lifecycle_validation() {
        use LifecycleStage::*;
        assert!(matches!(
            LifecycleModel::new("x", vec![(Attachment, "a".into())]),
            Err(ProfileError::MissingStage { .. })
        ));
        assert!(matches!(
            LifecycleModel::new("x", vec![]),
            Err(ProfileError::MissingStage { .. })
        ));
        assert!(matches!(
            LifecycleModel::new("x", vec![(Replication, "r".into()), (Attachment, "a".into())]),
            Err(ProfileError::Order { .. })
        ));
    }

    #[test]
    fn profile_file_round_trip() {
        let (v, p) = builtin_profiles();
        for prof in [v, p] {
            let text = prof.to_toml();
            assert_eq!(VirusProfile::from_toml(&text).unwrap(), prof);
        }
        let custom = r#"
organism = "worm"
stages = [["ATTACHMENT", "exploit"], ["REPLICATION", "copy"], ["SPREAD_RELEASE", "scan"]]
[traits]
contact_spread = true
"#;
        let w = VirusProfile::from_toml(custom).unwrap();
        assert_eq!(w.lifecycle.organism(), "worm");
        assert!(w.traits.get("contact_spread"));
        assert!(VirusProfile::from_toml("organism = 1").is_err());
    }

    fn arb_stages() -> impl Strategy<Value = Vec<LifecycleStage>> {
        proptest::collection::vec(0usize..6, 0..=8)
            .prop_map(|v| v.into_iter().map(|i| LifecycleStage::ALL[i]).collect())
    }

    fn arb_traits() -> impl Strategy<Value = TraitVector> {
        proptest::collection::vec(any::<bool>(), 12).prop_map(|bits| {
            let mut t = TraitVector::new();
            for (i, b) in bits.iter().enumerate() {
                let name = CORE_TRAITS.get(i).map(|s| s.to_string()).unwrap_or(format!("extra{i}"));
                t.set(&name, *b);
            }
            t
        })
    }

    proptest! {
        #[test]
        fn lcs_matches_brute_force(a in arb_stages(), b in arb_stages()) {
            prop_assert_eq!(lcs_pairs(&a, &b).len(), brute_force_lcs(&a, &b));
        }

        #[test]
        fn similarity_is_bounded_symmetric_reflexive(a in arb_traits(), b in arb_traits()) {
            let s = similarity(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, similarity(&b, &a));
            prop_assert_eq!(similarity(&a, &a), 1.0);
        }

        #[test]
        fn alignment_ignores_labels(labels in proptest::collection::vec("[a-z]{1,6}", 6)) {
            let (v, p) = builtin_profiles();
            let relabeled = LifecycleModel::new(
                "other",
                p.lifecycle.stages().iter().zip(&labels).map(|(e, l)| (e.stage, l.clone())).collect(),
            ).unwrap();
            prop_assert_eq!(
                align_lifecycles(&v.lifecycle, &relabeled).score,
                align_lifecycles(&v.lifecycle, &p.lifecycle).score
            );
        }
    }
}
