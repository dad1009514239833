//! Runs the default sweep (or the TOML config given as the first argument),
//! prints the INA and WS-vs-OS summaries and writes the reports to `out_dir`.
//!
//! cargo run --release --example sweep [-- config.toml]

use std::time::Instant;

use ina_noc::dataflow::Mode;
use ina_noc::harness::{compare, run_experiment, write_comparison, write_runs, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => ExperimentConfig::default(),
    };
    let start = Instant::now();
    let report = run_experiment(&cfg)?;
    let failed = report.runs.iter().filter(|r| !r.ok()).count();
    println!("{} runs ({failed} failed) in {:.1?}", report.runs.len(), start.elapsed());
    for r in report.runs.iter().filter(|r| !r.ok()) {
        println!("  {} {} E={} {}: {}", r.workload, r.layer.name, r.pes, r.mode, r.error.as_deref().unwrap_or(""));
    }
    write_runs(&report, &cfg.out_dir)?;
    for (base, variant) in [(Mode::WsPlain, Mode::WsIna), (Mode::OsGather, Mode::WsIna)] {
        let Ok(cmp) = compare(&report, base, variant) else { continue };
        write_comparison(&cmp, &cfg, &cfg.out_dir)?;
        println!("\n{base} / {variant}");
        println!("{:<10} {:>2} {:<8} {:>6} {:>9} {:>9}", "workload", "E", "scope", "layers", "latency", "energy");
        for s in &cmp.summary {
            println!(
                "{:<10} {:>2} {:<8} {:>6} {:>9.4} {:>9.4}",
                s.workload, s.pes, s.scope, s.layers, s.mean_latency, s.mean_energy
            );
        }
    }
    Ok(())
}
