//! Generates weight- and output-stationary schedules for AlexNet CONV2,
//! prints their traffic volume, and writes the first as a trace file.
//!
//! cargo run --example ws_trace [-- out.csv]

use ina_noc::analytic::MeshShape;
use ina_noc::dataflow::{gen_os_trace, gen_ws_trace, trace_volume, write_trace, GenOptions};
use ina_noc::noc::PacketClass;
use ina_noc::workload;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alex = workload::bundled("alexnet").expect("bundled workload");
    let conv2 = &alex.layers[1];
    let opts = GenOptions::new(MeshShape::new(8, 2)?).with_cap(Some(4)).with_stream_scale(32);
    let schedules = [
        ("ws_ina", gen_ws_trace(conv2, &opts, true)?),
        ("ws_plain", gen_ws_trace(conv2, &opts, false)?),
        ("os_gather", gen_os_trace(conv2, &opts)?),
    ];
    for (name, s) in &schedules {
        let v = trace_volume(s);
        println!(
            "{name}: {} of {} rounds, {} NI injects, {} NI ejects",
            s.rounds.len(),
            s.total_rounds,
            v.ni_injects,
            v.ni_ejects
        );
        for c in PacketClass::ALL {
            let cv = v.class(c);
            println!("  {:<10} {:>6} packets {:>7} flits", c.name(), cv.packets, cv.flits);
        }
    }
    if let Some(path) = std::env::args().nth(1) {
        write_trace(&schedules[0].1, std::fs::File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
