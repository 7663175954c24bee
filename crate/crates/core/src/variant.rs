//! Polymorphic virus variants and their lineage.
//!
//! A variant is an immutable behavioral core (`core_signature`, shared by the
//! whole lineage) wrapped in a per-copy decoration identified by a 64-bit
//! `decoration_seed`. The observable `surface_signature` is a 128-bit digest
//! over both, so every copy looks different to an exact-match scanner.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_128;

use crate::rng::{rng_from_seed, split_seed, stream};

pub const CORE_SIGNATURE_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariantId(pub u64);

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type CoreSignature = [u8; CORE_SIGNATURE_LEN];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SurfaceSignature(pub u128);

impl SurfaceSignature {
    pub fn compute(core: &CoreSignature, decoration_seed: u64) -> Self {
        let mut buf = [0u8; CORE_SIGNATURE_LEN + 8];
        buf[..CORE_SIGNATURE_LEN].copy_from_slice(core);
        buf[CORE_SIGNATURE_LEN..].copy_from_slice(&decoration_seed.to_le_bytes());
        SurfaceSignature(xxh3_128(&buf))
    }
}

impl fmt::Display for SurfaceSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// One node of the polymorphic lineage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirusVariant {
    pub id: VariantId,
    pub parent: Option<VariantId>,
    pub generation: u32,
    pub core_signature: CoreSignature,
    pub decoration_seed: u64,
    pub surface_signature: SurfaceSignature,
    pub created_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineageError {
    #[error("unknown variant {0}")]
    UnknownVariant(VariantId),
    #[error("lineage integrity violated: {0}")]
    Integrity(String),
}

/// Mutation history of one world. Nodes are only ever appended.
#[derive(Debug, Clone)]
pub struct LineageTree {
    root: VariantId,
    nodes: BTreeMap<VariantId, VirusVariant>,
    children: BTreeMap<VariantId, Vec<VariantId>>,
    used_seeds: HashSet<u64>,
    next_id: u64,
}

impl LineageTree {
    /// Creates a lineage whose generation-0 variant is derived from `world_seed`.
    pub fn spawn_root(world_seed: u64) -> Self {
        let mut rng = rng_from_seed(split_seed(world_seed, stream::CORE));
        let mut core = [0u8; CORE_SIGNATURE_LEN];
        rng.fill_bytes(&mut core);
        let decoration_seed = rng.random::<u64>();
        let root = VirusVariant {
            id: VariantId(0),
            parent: None,
            generation: 0,
            core_signature: core,
            decoration_seed,
            surface_signature: SurfaceSignature::compute(&core, decoration_seed),
            created_tick: 0,
        };
        let mut nodes = BTreeMap::new();
        nodes.insert(root.id, root);
        let mut children = BTreeMap::new();
        children.insert(root.id, Vec::new());
        LineageTree {
            root: root.id,
            nodes,
            children,
            used_seeds: HashSet::from([decoration_seed]),
            next_id: 1,
        }
    }

    pub fn root(&self) -> &VirusVariant {
        &self.nodes[&self.root]
    }

    pub fn get(&self, id: VariantId) -> Option<&VirusVariant> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: VariantId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn children(&self, id: VariantId) -> &[VariantId] {
        self.children.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// All variants in id (creation) order.
    pub fn iter(&self) -> impl Iterator<Item = &VirusVariant> {
        self.nodes.values()
    }

    /// Produces a child of `parent` with a fresh decoration seed.
    ///
    /// Seeds already used in this lineage are redrawn, so surface signatures
    /// stay distinct across the whole run.
    pub fn mutate<R: Rng + ?Sized>(
        &mut self,
        parent: VariantId,
        tick: u64,
        rng: &mut R,
    ) -> Result<VirusVariant, LineageError> {
        let p = *self
            .nodes
            .get(&parent)
            .ok_or(LineageError::UnknownVariant(parent))?;
        let mut seed = rng.random::<u64>();
        while !self.used_seeds.insert(seed) {
            seed = rng.random::<u64>();
        }
        let child = VirusVariant {
            id: VariantId(self.next_id),
            parent: Some(parent),
            generation: p.generation + 1,
            core_signature: p.core_signature,
            decoration_seed: seed,
            surface_signature: SurfaceSignature::compute(&p.core_signature, seed),
            created_tick: tick,
        };
        self.next_id += 1;
        self.nodes.insert(child.id, child);
        self.children.entry(parent).or_default().push(child.id);
        self.children.insert(child.id, Vec::new());
        Ok(child)
    }

    /// Checks every structural invariant of the tree.
    pub fn validate(&self) -> Result<(), LineageError> {
        let err = |m: String| Err(LineageError::Integrity(m));
        let root = self.root();
        if root.parent.is_some() || root.generation != 0 {
            return err("root has a parent or nonzero generation".into());
        }
        let mut seen = HashSet::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                return err(format!("variant {id} reached twice"));
            }
            let node = &self.nodes[&id];
            for &c in self.children(id) {
                let Some(child) = self.nodes.get(&c) else {
                    return err(format!("dangling child {c}"));
                };
                if child.parent != Some(id) {
                    return err(format!("child {c} does not point back to {id}"));
                }
                if child.generation != node.generation + 1 {
                    return err(format!("generation jump at {c}"));
                }
                stack.push(c);
            }
        }
        if seen.len() != self.nodes.len() {
            return err("unreachable variants present".into());
        }
        let mut surfaces = HashSet::new();
        for v in self.nodes.values() {
            if v.core_signature != root.core_signature {
                return err(format!("variant {} has a foreign core", v.id));
            }
            if !surfaces.insert(v.surface_signature) {
                return err(format!("surface signature collision at {}", v.id));
            }
        }
        Ok(())
    }

    /// Newline-delimited export:
    /// `variant_id,parent_id,generation,created_tick,surface_signature_hex`.
    pub fn export_csv(&self) -> String {
        let mut out = String::from("variant_id,parent_id,generation,created_tick,surface_signature_hex\n");
        for v in self.nodes.values() {
            let parent = v.parent.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                v.id, parent, v.generation, v.created_tick, v.surface_signature
            ));
        }
        out
    }
}

/// Exact-match lookup in a signature database.
pub fn is_known(variant: &VirusVariant, signature_db: &HashSet<SurfaceSignature>) -> bool {
    signature_db.contains(&variant.surface_signature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn root_is_generation_zero_without_parent() {
        let t = LineageTree::spawn_root(7);
        assert_eq!(t.root().generation, 0);
        assert!(t.root().parent.is_none());
    }

    #[test]
    fn root_is_deterministic() {
        assert_eq!(LineageTree::spawn_root(7).root(), LineageTree::spawn_root(7).root());
        assert_ne!(
            LineageTree::spawn_root(7).root().core_signature,
            LineageTree::spawn_root(8).root().core_signature
        );
    }

    #[test]
    fn mutation_keeps_core_and_increments_generation() {
        let mut t = LineageTree::spawn_root(7);
        let mut rng = rng_from_seed(1);
        let root = *t.root();
        let c = t.mutate(root.id, 1, &mut rng).unwrap();
        assert_eq!(c.core_signature, root.core_signature);
        assert_eq!(c.generation, 1);
        assert_eq!(c.parent, Some(root.id));
    }

    #[test]
    fn siblings_differ_and_no_seed_repeats() {
        let mut t = LineageTree::spawn_root(3);
        let mut rng = rng_from_seed(99);
        let root = t.root().id;
        let a = t.mutate(root, 0, &mut rng).unwrap();
        let b = t.mutate(root, 0, &mut rng).unwrap();
        assert_ne!(a.surface_signature, b.surface_signature);

        // brute force over the raw draw sequence
        let mut raw = rng_from_seed(99);
        let draws: HashSet<u64> = (0..10_000).map(|_| raw.random::<u64>()).collect();
        assert_eq!(draws.len(), 10_000);
    }

    #[test]
    fn unknown_parent_is_rejected() {
        let mut t = LineageTree::spawn_root(3);
        let mut rng = rng_from_seed(0);
        assert_eq!(
            t.mutate(VariantId(55), 0, &mut rng),
            Err(LineageError::UnknownVariant(VariantId(55)))
        );
    }

    #[test]
    fn signature_db_lookup() {
        let mut t = LineageTree::spawn_root(11);
        let mut rng = rng_from_seed(5);
        let root = *t.root();
        let child = t.mutate(root.id, 0, &mut rng).unwrap();
        assert!(!is_known(&child, &HashSet::new()));
        let db = HashSet::from([root.surface_signature]);
        assert!(is_known(&root, &db));
        assert!(!is_known(&child, &db));
    }

    #[test]
    fn parent_signature_never_matches_descendants() {
        // 100-variant lineage, every child checked against a db holding only its parent
        let mut t = LineageTree::spawn_root(21);
        let mut rng = rng_from_seed(21);
        let mut frontier = vec![t.root().id];
        while t.len() < 100 {
            let p = frontier[rng.random_range(0..frontier.len())];
            let c = t.mutate(p, 0, &mut rng).unwrap();
            frontier.push(c.id);
        }
        for v in t.iter() {
            if let Some(p) = v.parent {
                let db = HashSet::from([t.get(p).unwrap().surface_signature]);
                assert!(!is_known(v, &db));
            }
        }
        t.validate().unwrap();
    }

    #[test]
    fn export_has_one_line_per_variant() {
        let mut t = LineageTree::spawn_root(1);
        let mut rng = rng_from_seed(1);
        let r = t.root().id;
        t.mutate(r, 4, &mut rng).unwrap();
        let csv = t.export_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,,0,0,"));
        assert!(lines[2].starts_with("1,0,1,4,"));
        assert_eq!(lines[2].rsplit(',').next().unwrap().len(), 32);
    }

    proptest! {
        #[test]
        fn random_mutation_sequences_keep_tree_valid(
            seed in any::<u64>(),
            picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..200),
        ) {
            let mut t = LineageTree::spawn_root(seed);
            let mut rng = rng_from_seed(seed ^ 1);
            let mut ids = vec![t.root().id];
            for (tick, pick) in picks.iter().enumerate() {
                let parent = ids[pick.index(ids.len())];
                let c = t.mutate(parent, tick as u64, &mut rng).unwrap();
                prop_assert_eq!(c.generation, t.get(parent).unwrap().generation + 1);
                ids.push(c.id);
            }
            prop_assert!(t.validate().is_ok());
        }
    }
}
