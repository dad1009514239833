//! Accumulates partial sums along a column chain with and without in-network
//! accumulation and prints the latency saved and the NI traffic avoided.
//!
//! cargo run --example ina_chain

use ina_noc::analytic::MeshShape;
use ina_noc::dataflow::synthetic_chain;
use ina_noc::exec::execute;
use ina_noc::noc::NocConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = NocConfig::default();
    let mesh = MeshShape::new(8, 1)?;
    println!("{:>2} {:>7} {:>7} {:>6} {:>10} {:>10}", "k", "ina", "plain", "saved", "ina_ni", "plain_ni");
    for k in [1, 2, 4, 6] {
        let operands: Vec<u32> = (1..=k + 1).map(|i| i * 100).collect();
        let with = execute(&synthetic_chain(k, &operands, mesh, cfg.flit_width, true)?, &cfg, false)?;
        let without = execute(&synthetic_chain(k, &operands, mesh, cfg.flit_width, false)?, &cfg, false)?;
        assert_eq!(with.chain_outputs, without.chain_outputs);
        let ni = |s: &ina_noc::noc::SimStats| s.total.ni_inject + s.total.ni_eject;
        println!(
            "{k:>2} {:>7} {:>7} {:>6} {:>10} {:>10}",
            with.cycles,
            without.cycles,
            without.cycles - with.cycles,
            ni(&with.stats),
            ni(&without.stats)
        );
    }
    Ok(())
}
