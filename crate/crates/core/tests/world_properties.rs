use proptest::prelude::*;

use virosim::topology::{build_world, AvMix, HostSetup, TopologyKind, TopologySpec};
use virosim::world::{events_to_csv, EventKind, InfectionVector, VirusParams, WorldState, DROPPED_EXECUTABLES};

fn topo(kind: TopologyKind, hosts: u32, edge_probability: f64) -> TopologySpec {
    TopologySpec { kind, hosts, edge_probability, ..TopologySpec::default() }
}

fn kinds() -> impl Strategy<Value = TopologyKind> {
    prop_oneof![
        Just(TopologyKind::Complete),
        Just(TopologyKind::ErdosRenyi),
        Just(TopologyKind::StarCloud),
    ]
}

fn file_counts(w: &WorldState) -> Vec<usize> {
    w.hosts.iter().map(|h| h.files.len()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn spread_without_av_is_monotone_and_conserves_files(
        seed in any::<u64>(),
        kind in kinds(),
        hosts in 2u32..25,
        open in 0.0f64..=1.0,
        files in 0usize..6,
    ) {
        let virus = VirusParams { open_probability: open, email_attachment: 0.2, ..VirusParams::default() };
        let setup = HostSetup { files_per_host: files, file_size: 8, ..HostSetup::default() };
        let mut b = build_world(seed, &topo(kind, hosts, 0.3), &setup, &AvMix::none(), &virus).unwrap();
        let w = &mut b.world;
        let mut prev_ever = w.ever_infected_count();
        let mut prev_now = w.infected_count();
        for _ in 0..15 {
            let before = file_counts(w);
            let start = w.events.len();
            let tick = w.tick;
            w.step(&mut b.rng);
            prop_assert_eq!(w.tick, tick + 1);
            prop_assert!(w.ever_infected_count() >= prev_ever);
            prop_assert!(w.infected_count() >= prev_now);
            prev_ever = w.ever_infected_count();
            prev_now = w.infected_count();
            // files appear only through drops
            let after = file_counts(w);
            for (h, (b0, a0)) in before.iter().zip(&after).enumerate() {
                let drops = w.events[start..]
                    .iter()
                    .filter(|e| e.kind == EventKind::Drop && e.host.map(|x| x.0 as usize) == Some(h))
                    .count();
                prop_assert_eq!(*a0, b0 + drops);
            }
            w.check_invariants().map_err(TestCaseError::fail)?;
        }
    }

    #[test]
    fn invariants_hold_with_antivirus(seed in any::<u64>(), coverage in 0.0f64..=1.0, behavioral in 0.0f64..=1.0) {
        let av = AvMix { coverage, behavioral_share: behavioral, signature_lag: 2, ..AvMix::default() };
        let virus = VirusParams { open_probability: 0.6, ..VirusParams::default() };
        let setup = HostSetup { files_per_host: 4, file_size: 8, ..HostSetup::default() };
        let mut b = build_world(seed, &topo(TopologyKind::StarCloud, 10, 0.0), &setup, &av, &virus).unwrap();
        for _ in 0..20 {
            b.world.step(&mut b.rng);
            b.world.check_invariants().map_err(TestCaseError::fail)?;
        }
    }

    #[test]
    fn event_log_is_a_function_of_seed(seed in any::<u64>(), kind in kinds()) {
        let run = || {
            let mut b = build_world(seed, &topo(kind, 12, 0.2), &HostSetup::default(), &AvMix::default(), &VirusParams::default()).unwrap();
            for _ in 0..10 {
                b.world.step(&mut b.rng);
            }
            events_to_csv(&b.world.events)
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn fresh_infections_drop_exactly_three() {
    let mut b = build_world(3, &topo(TopologyKind::StarCloud, 30, 0.0), &HostSetup::default(), &AvMix::none(), &VirusParams::default()).unwrap();
    for _ in 0..30 {
        b.world.step(&mut b.rng);
    }
    for h in &b.world.hosts {
        let expected = if h.ever_infected { DROPPED_EXECUTABLES } else { 0 };
        assert_eq!(h.dropped_executables().count(), expected);
    }
}

fn cloud_infections(open: f64, seed: u64) -> (usize, WorldState) {
    let virus = VirusParams { open_probability: open, ..VirusParams::default() };
    let mut b = build_world(seed, &topo(TopologyKind::StarCloud, 20, 0.0), &HostSetup::default(), &AvMix::none(), &virus).unwrap();
    for _ in 0..10 {
        b.world.step(&mut b.rng);
    }
    let n = b
        .world
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Infect && e.vector == Some(InfectionVector::CloudSync))
        .count();
    (n, b.world)
}

#[test]
fn open_probability_endpoints() {
    for seed in 0..20 {
        let (n, w) = cloud_infections(0.0, seed);
        assert_eq!(n, 0);
        assert_eq!(w.ever_infected_count(), 1);
        // with certain opening every other member is hit on the first tick
        let (n, w) = cloud_infections(1.0, seed);
        assert_eq!(n, 19);
        let first_tick: Vec<u64> = w
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Infect && e.vector == Some(InfectionVector::CloudSync))
            .map(|e| e.tick)
            .collect();
        assert!(first_tick.iter().all(|t| *t == 0));
    }
}

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

/// Log-linear fit of the early infected count on a well-mixed contact graph.
#[test]
fn early_growth_is_exponential() {
    let hosts = 200u32;
    let virus = VirusParams { email_attachment: 0.004, ..VirusParams::default() };
    let setup = HostSetup { files_per_host: 2, file_size: 8, ..HostSetup::default() };
    let mut fits = Vec::new();
    for seed in 0..30 {
        let mut b = build_world(seed, &topo(TopologyKind::Complete, hosts, 0.0), &setup, &AvMix::none(), &virus).unwrap();
        let mut counts = vec![b.world.infected_count() as f64];
        while counts.last().copied().unwrap() < f64::from(hosts) / 4.0 && counts.len() < 200 {
            b.world.step(&mut b.rng);
            counts.push(b.world.infected_count() as f64);
        }
        if counts.len() < 4 {
            continue;
        }
        let xs: Vec<f64> = (0..counts.len()).map(|t| t as f64).collect();
        let ys: Vec<f64> = counts.iter().map(|c| c.ln()).collect();
        fits.push(r_squared(&xs, &ys));
    }
    let mean = fits.iter().sum::<f64>() / fits.len() as f64;
    assert!(fits.len() >= 20, "too few usable runs: {}", fits.len());
    assert!(mean >= 0.9, "mean R^2 {mean}");
}

#[test]
fn seeds_do_not_share_streams() {
    let a = build_world(1, &topo(TopologyKind::StarCloud, 5, 0.0), &HostSetup::default(), &AvMix::none(), &VirusParams::default()).unwrap();
    let b = build_world(2, &topo(TopologyKind::StarCloud, 5, 0.0), &HostSetup::default(), &AvMix::none(), &VirusParams::default()).unwrap();
    assert_ne!(a.world.hosts[0].files[0].content, b.world.hosts[0].files[0].content);
}
