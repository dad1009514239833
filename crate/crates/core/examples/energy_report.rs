//! Simulates AlexNet CONV3 with and without in-network accumulation, tallies
//! event energy per packet class and prints the improvement ratios.
//!
//! cargo run --release --example energy_report

use ina_noc::analytic::MeshShape;
use ina_noc::dataflow::{gen_ws_trace, GenOptions};
use ina_noc::exec::execute;
use ina_noc::noc::{NocConfig, PacketClass};
use ina_noc::power::{improvement, latency_improvement, ratio_f64, tally, EnergyCoefficients, RunMeta, Units};
use ina_noc::workload;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alex = workload::bundled("alexnet").expect("bundled workload");
    let conv3 = &alex.layers[2];
    let cfg = NocConfig::default();
    let coeffs = EnergyCoefficients::default();
    let opts = GenOptions::new(MeshShape::new(8, 1)?).with_cap(Some(8)).with_stream_scale(32);
    let mut runs = Vec::new();
    for ina in [false, true] {
        let res = execute(&gen_ws_trace(conv3, &opts, ina)?, &cfg, false)?;
        let meta = RunMeta {
            layer: conv3.name.clone(),
            mesh: 8,
            pes_per_router: 1,
            mode: if ina { "ws_ina" } else { "ws_plain" }.into(),
            coefficients: "default".into(),
        };
        let energy = tally(&res.stats, &coeffs, meta);
        println!("{}: {} cycles, energy {}", energy.meta.mode, res.cycles, Units(energy.total));
        for c in PacketClass::ALL {
            println!("  {:<10} {}", c.name(), Units(energy.by_class[c.index()]));
        }
        runs.push((res.cycles, energy));
    }
    let (plain, ina) = (&runs[0], &runs[1]);
    println!("latency improvement {:.4}", ratio_f64(latency_improvement(plain.0, ina.0)?));
    println!("energy improvement  {:.4}", ratio_f64(improvement(&plain.1, &ina.1)?));
    Ok(())
}
