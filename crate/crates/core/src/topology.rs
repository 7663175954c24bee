//! Builds populated worlds from a topology description.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::defense::{AvConfig, DEFAULT_BEHAVIORAL_DETECT_PROB};
use crate::rng::{rng_from_seed, split_seed, stream, SimRng};
use crate::world::{random_name, HostId, InfectionVector, VirusParams, WorldError, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    /// Contact edges between every ordered pair of hosts.
    Complete,
    /// Each unordered pair linked in both directions with `edge_probability`.
    ErdosRenyi,
    /// Hosts around a single cloud share, no direct contact.
    StarCloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub hosts: u32,
    pub edge_probability: f64,
    /// Label carried by generated contact edges.
    pub edge_vector: InfectionVector,
    /// Also put every host in one cloud share (implied by `star_cloud`).
    pub shared_cloud: bool,
    pub patient_zero: u32,
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec {
            kind: TopologyKind::StarCloud,
            hosts: 100,
            edge_probability: 0.05,
            edge_vector: InfectionVector::EmailAttachment,
            shared_cloud: false,
            patient_zero: 0,
        }
    }
}

/// Per-host contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HostSetup {
    pub files_per_host: usize,
    pub file_size: usize,
    /// Fraction of hosts with shadow copies turned on.
    pub shadow_fraction: f64,
    /// Snapshot every shadow-enabled host before the outbreak.
    pub initial_snapshot: bool,
}

impl Default for HostSetup {
    fn default() -> Self {
        HostSetup { files_per_host: 20, file_size: 64, shadow_fraction: 0.5, initial_snapshot: true }
    }
}

/// How antivirus is distributed over the hosts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvMix {
    /// Fraction of hosts running any AV.
    pub coverage: f64,
    /// Fraction of AV hosts whose engine is behavioral; the rest match signatures.
    pub behavioral_share: f64,
    pub behavioral_detect_prob: f64,
    pub live_analysis: bool,
    pub signature_lag: u64,
    pub scan_every: u64,
}

impl Default for AvMix {
    fn default() -> Self {
        AvMix {
            coverage: 0.0,
            behavioral_share: 0.5,
            behavioral_detect_prob: DEFAULT_BEHAVIORAL_DETECT_PROB,
            live_analysis: true,
            signature_lag: 5,
            scan_every: 1,
        }
    }
}

impl AvMix {
    pub fn none() -> Self {
        AvMix::default()
    }
}

/// A world plus the stream its ticks should draw from.
pub struct BuiltWorld {
    pub world: WorldState,
    pub rng: SimRng,
    pub patient_zero: HostId,
}

/// Creates hosts, files, shares and edges, then infects patient zero by
/// email. Everything is drawn from the world stream of `seed`, which the
/// caller keeps using for `step`.
pub fn build_world(
    seed: u64,
    topo: &TopologySpec,
    setup: &HostSetup,
    av: &AvMix,
    virus: &VirusParams,
) -> Result<BuiltWorld, WorldError> {
    let mut rng = rng_from_seed(split_seed(seed, stream::WORLD));
    let mut world = WorldState::new(seed, virus.clone());
    world.signature_lag = av.signature_lag;
    world.scan_every = av.scan_every.max(1);

    for _ in 0..topo.hosts {
        let shadow = rng.random_bool(setup.shadow_fraction);
        let engine = if rng.random_bool(av.coverage) {
            let mut cfg = if rng.random_bool(av.behavioral_share) {
                AvConfig::behavioral(av.behavioral_detect_prob)
            } else {
                AvConfig::signature(Default::default())
            };
            if cfg.kind == crate::defense::AvKind::Behavioral {
                cfg.live_analysis = av.live_analysis;
            }
            Some(cfg)
        } else {
            None
        };
        let h = world.add_host(shadow, engine);
        for _ in 0..setup.files_per_host {
            let content: Vec<u8> = (0..setup.file_size).map(|_| rng.random()).collect();
            world.add_file(h, format!("{}.docx", random_name(&mut rng)), content)?;
        }
        if shadow && setup.initial_snapshot {
            world.take_snapshot(h)?;
        }
    }

    let n = topo.hosts;
    match topo.kind {
        TopologyKind::Complete => {
            for a in 0..n {
                for b in 0..n {
                    if a != b {
                        world.add_edge(HostId(a), HostId(b), topo.edge_vector)?;
                    }
                }
            }
        }
        TopologyKind::ErdosRenyi => {
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random_bool(topo.edge_probability) {
                        world.add_edge(HostId(a), HostId(b), topo.edge_vector)?;
                        world.add_edge(HostId(b), HostId(a), topo.edge_vector)?;
                    }
                }
            }
        }
        TopologyKind::StarCloud => {}
    }
    if n > 0 && (topo.kind == TopologyKind::StarCloud || topo.shared_cloud) {
        world.add_share((0..n).map(HostId).collect())?;
    }

    let p0 = HostId(topo.patient_zero);
    if n > 0 {
        let root = world.lineage.root().id;
        world.infect_host(p0, root, InfectionVector::EmailAttachment, &mut rng)?;
    }
    Ok(BuiltWorld { world, rng, patient_zero: p0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: TopologyKind, hosts: u32) -> TopologySpec {
        TopologySpec { kind, hosts, ..TopologySpec::default() }
    }

    #[test]
    fn complete_graph_has_all_ordered_pairs() {
        let b = build_world(1, &spec(TopologyKind::Complete, 6), &HostSetup::default(), &AvMix::none(), &VirusParams::default()).unwrap();
        assert_eq!(b.world.edges.len(), 30);
        assert!(b.world.shares.is_empty());
        assert_eq!(b.world.infected_count(), 1);
    }

    #[test]
    fn star_cloud_is_one_share() {
        let b = build_world(1, &spec(TopologyKind::StarCloud, 10), &HostSetup::default(), &AvMix::none(), &VirusParams::default()).unwrap();
        assert!(b.world.edges.is_empty());
        assert_eq!(b.world.shares.len(), 1);
        assert_eq!(b.world.shares[0].members.len(), 10);
    }

    #[test]
    fn erdos_renyi_endpoints() {
        let mut t = spec(TopologyKind::ErdosRenyi, 30);
        t.edge_probability = 0.0;
        let b = build_world(3, &t, &HostSetup::default(), &AvMix::none(), &VirusParams::default()).unwrap();
        assert!(b.world.edges.is_empty());
        t.edge_probability = 1.0;
        let b = build_world(3, &t, &HostSetup::default(), &AvMix::none(), &VirusParams::default()).unwrap();
        assert_eq!(b.world.edges.len(), 30 * 29);
    }

    #[test]
    fn setup_is_applied() {
        let setup = HostSetup { files_per_host: 4, file_size: 8, shadow_fraction: 1.0, initial_snapshot: true };
        let av = AvMix { coverage: 1.0, behavioral_share: 0.0, ..AvMix::default() };
        let b = build_world(2, &spec(TopologyKind::StarCloud, 5), &setup, &av, &VirusParams::default()).unwrap();
        for h in &b.world.hosts {
            assert!(h.shadow_enabled);
            assert_eq!(h.shadow_snapshots.len(), 1);
            assert_eq!(h.av.as_ref().unwrap().kind, crate::defense::AvKind::Signature);
        }
        // patient zero also holds its three droppers
        assert_eq!(b.world.hosts[0].files.len(), 7);
        assert_eq!(b.world.hosts[1].files.len(), 4);
        b.world.check_invariants().unwrap();
    }

    #[test]
    fn unknown_patient_zero_is_an_error() {
        let mut t = spec(TopologyKind::StarCloud, 3);
        t.patient_zero = 9;
        assert!(build_world(1, &t, &HostSetup::default(), &AvMix::none(), &VirusParams::default()).is_err());
    }

    #[test]
    fn same_seed_same_world() {
        let t = spec(TopologyKind::ErdosRenyi, 20);
        let mk = |s| {
            let mut b = build_world(s, &t, &HostSetup::default(), &AvMix::default(), &VirusParams::default()).unwrap();
            for _ in 0..10 {
                b.world.step(&mut b.rng);
            }
            crate::world::events_to_csv(&b.world.events)
        };
        assert_eq!(mk(4), mk(4));
        assert_ne!(mk(4), mk(5));
    }
}
