use ina_noc::noc::{
    run_until_drained, NetEvent, Network, NocConfig, NocError, NodeAddress, PacketClass, PacketSpec, TimedTraffic,
};
use proptest::prelude::*;

fn a(x: u16, y: u16) -> NodeAddress {
    NodeAddress::new(x, y)
}

/// Independent closed form: per hop one router plus one link, then the
/// destination router, the body flits behind the head, and the NI.
fn oracle_latency(hops: u64, flits: u64) -> u64 {
    hops * (4 + 1) + 4 + (flits - 1) + 2
}

fn single(cfg: NocConfig, spec: PacketSpec) -> (u64, u64) {
    let mut net = Network::build_mesh(cfg).unwrap();
    let mut src = TimedTraffic::new(vec![(0, spec)]);
    let stats = run_until_drained(&mut net, &mut src).unwrap();
    assert_eq!(stats.latencies.len(), 1);
    let r = &stats.latencies[0];
    (r.inject_cycle, r.latency())
}

#[test]
fn mesh_sizes() {
    for (n, routers, links) in [(2u16, 4, 4), (8, 64, 112), (16, 256, 480)] {
        let net = Network::build_mesh(NocConfig::default().with_n(n)).unwrap();
        assert_eq!((net.router_count(), net.link_count()), (routers, links));
        assert_eq!(net.channel_count(), 2 * links);
    }
    assert!(Network::build_mesh(NocConfig::default().with_n(1)).is_err());
}

#[test]
fn adjacent_single_flit() {
    let spec = PacketSpec::new(PacketClass::Unicast, a(0, 0), a(1, 0), 1);
    let (inject, latency) = single(NocConfig::default(), spec);
    assert_eq!(inject, 2, "enters the router after the NI latency");
    assert_eq!(latency, oracle_latency(1, 1));
}

#[test]
fn empty_network_is_inert() {
    let mut net = Network::build_mesh(NocConfig::default()).unwrap();
    let before = net.stats().clone();
    for _ in 0..1000 {
        assert!(net.step().unwrap().is_empty());
    }
    assert_eq!(net.stats(), &before);
    let mut fresh = Network::build_mesh(NocConfig::default()).unwrap();
    let stats = run_until_drained(&mut fresh, &mut TimedTraffic::new(vec![])).unwrap();
    assert_eq!(stats.total_cycles, 0);
    assert_eq!(fresh.cycle(), 0);
}

#[test]
fn disjoint_paths_see_zero_load() {
    let p1 = PacketSpec::new(PacketClass::Unicast, a(0, 0), a(3, 0), 2);
    let p2 = PacketSpec::new(PacketClass::Unicast, a(0, 5), a(0, 7), 3);
    let mut net = Network::build_mesh(NocConfig::default()).unwrap();
    let stats = run_until_drained(&mut net, &mut TimedTraffic::new(vec![(0, p1), (0, p2)])).unwrap();
    let mut lat: Vec<_> = stats.latencies.iter().map(|r| (r.src, r.latency())).collect();
    lat.sort();
    assert_eq!(lat, vec![(a(0, 0), oracle_latency(3, 2)), (a(0, 5), oracle_latency(2, 3))]);
}

#[test]
fn distinct_nodes_accept_same_cycle() {
    let mut net = Network::build_mesh(NocConfig::default()).unwrap();
    for x in 0..8 {
        net.inject(PacketSpec::new(PacketClass::Unicast, a(x, 0), a(x, 7), 2), 0).unwrap();
    }
}

#[test]
fn backpressure_then_accept() {
    let cfg = NocConfig { ni_queue_capacity: 1, ..NocConfig::default() };
    let mut net = Network::build_mesh(cfg).unwrap();
    let p = PacketSpec::new(PacketClass::Unicast, a(0, 0), a(2, 2), 2);
    net.inject(p.clone(), 0).unwrap();
    assert!(matches!(net.inject(p.clone(), 0), Err(NocError::Backpressure(_))));
    let mut accepted = false;
    for _ in 0..20 {
        net.step().unwrap();
        if net.inject(p.clone(), net.cycle()).is_ok() {
            accepted = true;
            break;
        }
    }
    assert!(accepted);
}

#[test]
fn multicast_taps_see_copies() {
    let spec = PacketSpec::new(PacketClass::Stream, a(0, 3), a(5, 3), 4).with_taps(vec![a(0, 3), a(2, 3)]);
    let mut net = Network::build_mesh(NocConfig::default()).unwrap();
    net.inject(spec, 0).unwrap();
    let mut taps = Vec::new();
    let mut delivered = None;
    while net.next_activity().is_some() {
        for e in net.step().unwrap() {
            match e {
                NetEvent::Tapped { node, cycle, .. } => taps.push((node, cycle)),
                NetEvent::Delivered { cycle, .. } => delivered = Some(cycle),
                _ => {}
            }
        }
    }
    // Each tap sees the tail leave that router, then the NI.
    assert_eq!(taps, vec![(a(0, 3), 2 + 3 + 3 + 1 + 2), (a(2, 3), 2 + 10 + 3 + 3 + 1 + 2)]);
    assert_eq!(delivered, Some(2 + oracle_latency(5, 4)));
    assert_eq!(net.stats().total.ni_eject, 3);
}

#[test]
fn tap_off_route_rejected() {
    let spec = PacketSpec::new(PacketClass::Stream, a(0, 3), a(5, 3), 4).with_taps(vec![a(2, 2)]);
    let mut net = Network::build_mesh(NocConfig::default()).unwrap();
    assert!(net.inject(spec, 0).is_err());
}

fn random_trace(seed: u64, count: usize, n: u16) -> Vec<(u64, PacketSpec)> {
    let mut s = seed;
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 33) as u32
    };
    (0..count)
        .map(|_| {
            let src = a((next() % n as u32) as u16, (next() % n as u32) as u16);
            let dst = a((next() % n as u32) as u16, (next() % n as u32) as u16);
            let class = PacketClass::ALL[(next() % 4) as usize];
            let flits = 1 + (next() % 9) as u16;
            (next() as u64 % 200, PacketSpec::new(class, src, dst, flits))
        })
        .collect()
}

#[test]
fn random_trace_is_deterministic() {
    let run = || {
        let mut net = Network::build_mesh(NocConfig::default()).unwrap();
        net.enable_event_log();
        let stats = run_until_drained(&mut net, &mut TimedTraffic::new(random_trace(7, 100, 8))).unwrap();
        (stats, net.take_event_log())
    };
    let (s1, l1) = run();
    let (s2, l2) = run();
    assert_eq!(s1, s2);
    assert_eq!(l1, l2);
    assert_eq!(s1.latencies.len(), 100);
}

#[test]
fn ina_disabled_is_cycle_identical_without_chains() {
    let run = |ina| {
        let cfg = NocConfig { ina_enabled: ina, ..NocConfig::default() };
        let mut net = Network::build_mesh(cfg).unwrap();
        net.enable_event_log();
        let stats = run_until_drained(&mut net, &mut TimedTraffic::new(random_trace(11, 150, 8))).unwrap();
        (stats, net.take_event_log())
    };
    assert_eq!(run(true), run(false));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Zero-load latency for packets that fit in one buffer; longer packets
    /// additionally wait on the credit round trip.
    #[test]
    fn zero_load_latency(sx in 0u16..8, sy in 0u16..8, dx in 0u16..8, dy in 0u16..8, flits in 1u16..=4) {
        let spec = PacketSpec::new(PacketClass::Unicast, a(sx, sy), a(dx, dy), flits);
        let hops = a(sx, sy).hops_to(a(dx, dy)) as u64;
        let (_, latency) = single(NocConfig::default(), spec);
        prop_assert_eq!(latency, oracle_latency(hops, flits as u64));
        prop_assert_eq!(latency, NocConfig::default().zero_load_latency(hops as u32, flits));
    }

    /// Every packet is delivered exactly once, flits are conserved, and no
    /// input buffer ever holds more than its depth.
    #[test]
    fn conservation_and_credit_safety(seed in any::<u64>(), count in 1usize..120, n in 2u16..6, depth in 1u16..5) {
        let cfg = NocConfig { n, buffer_depth: depth, ..NocConfig::default() };
        let mut net = Network::build_mesh(cfg).unwrap();
        let mut src = TimedTraffic::new(random_trace(seed, count, n));
        let stats = run_until_drained(&mut net, &mut src).unwrap();
        prop_assert_eq!(stats.packets_injected, count as u64);
        prop_assert_eq!(stats.packets_delivered, count as u64);
        prop_assert_eq!(stats.flits_created, stats.flits_retired);
        prop_assert!(stats.max_buffer_occupancy <= depth);
        let mut ids: Vec<_> = stats.latencies.iter().map(|r| r.packet).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), count);
    }
}
