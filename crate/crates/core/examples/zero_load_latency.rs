//! Sends single packets through an empty 8x8 mesh and compares the measured
//! latency with the closed-form zero-load latency.
//!
//! cargo run --example zero_load_latency

use ina_noc::noc::{run_until_drained, Network, NocConfig, NodeAddress, PacketClass, PacketSpec, TimedTraffic};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = NocConfig::default();
    println!("{:>5} {:>5} {:>8} {:>8}", "hops", "flits", "measured", "formula");
    for (dst, flits) in [((1, 0), 1), ((3, 0), 2), ((7, 0), 3), ((7, 7), 4), ((4, 6), 2)] {
        let src = NodeAddress::new(0, 0);
        let dst = NodeAddress::new(dst.0, dst.1);
        let mut net = Network::build_mesh(cfg.clone())?;
        let spec = PacketSpec::new(PacketClass::Unicast, src, dst, flits);
        let stats = run_until_drained(&mut net, &mut TimedTraffic::new(vec![(0, spec)]))?;
        let hops = src.hops_to(dst);
        let measured = stats.latencies[0].latency();
        println!("{hops:>5} {flits:>5} {measured:>8} {:>8}", cfg.zero_load_latency(hops, flits));
    }
    Ok(())
}
