//! Prints the accumulation round tables for the bundled workloads at 8x8 and
//! 16x16, and the multi-PE round counts for one layer.
//!
//! cargo run --example analytic_tables

use ina_noc::analytic::{self, MeshShape, PeMemory, Precision};
use ina_noc::workload;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q = Precision::default();
    let mem = PeMemory::default();
    let meshes = [MeshShape::new(8, 1)?, MeshShape::new(16, 1)?];
    for name in workload::BUNDLED {
        let w = workload::bundled(name).expect("bundled workload");
        println!("# {name}");
        print!("{}", analytic::table_report(&w.layers, &meshes, q, mem, false).to_csv());
    }

    let alex = workload::bundled("alexnet").expect("bundled workload");
    let conv2 = &alex.layers[1];
    println!("\n{} on 8x8, rounds by PEs per router:", conv2.name);
    for e in [1, 2, 4, 8] {
        let plan = analytic::ina_rounds_multi_pe(conv2, MeshShape::new(8, e)?, q, mem)?;
        println!("  E={e}: {}", plan.rounds);
    }
    Ok(())
}
