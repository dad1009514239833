use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ina_noc::analytic::MeshShape;
use ina_noc::dataflow::{write_trace, Mode};
use ina_noc::exec::execute;
use ina_noc::harness::{
    build_schedule, compare, emit_tables, load_workloads, run_experiment, table_footnotes, write_comparison,
    write_runs, write_tables, ExperimentConfig,
};
use ina_noc::power::ratio_f64;

#[derive(Parser)]
#[command(name = "ina-noc", version, about = "NoC simulator with in-network partial-sum accumulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print and write the analytic round tables.
    Tables {
        #[command(flatten)]
        common: Common,
        /// Mesh sides to tabulate.
        #[arg(long = "meshes", value_delimiter = ',', default_values_t = [8u32, 16])]
        meshes: Vec<u32>,
    },
    /// Simulate every configured point and write runs.csv plus comparisons.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate two modes and write their per-layer ratios.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_mode, default_value = "ws_plain")]
        baseline: Mode,
        #[arg(long, value_parser = parse_mode, default_value = "ws_ina")]
        variant: Mode,
    },
    /// Write the trace of one layer and optionally simulate it.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Layer name within the first workload.
        #[arg(long)]
        layer: String,
        /// Simulate the trace and print its statistics.
        #[arg(long)]
        simulate: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled workload name or layer file; repeatable.
    #[arg(long = "workload")]
    workloads: Vec<String>,
    /// Mesh side N.
    #[arg(long)]
    mesh: Option<u16>,
    /// PEs per router, comma separated.
    #[arg(long, value_delimiter = ',')]
    pes: Vec<u32>,
    /// Modes, comma separated: ws_ina, ws_plain, os_gather.
    #[arg(long = "mode", value_delimiter = ',', value_parser = parse_mode)]
    modes: Vec<Mode>,
    /// Rounds simulated per run; 0 simulates whole layers.
    #[arg(long)]
    rounds_cap: Option<u64>,
    #[arg(long)]
    force_rounds: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-run network event logs.
    #[arg(long)]
    event_log: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("unknown mode `{s}`; expected ws_ina, ws_plain or os_gather"))
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.workloads.is_empty() {
            cfg.workloads = self.workloads.clone();
        }
        if let Some(n) = self.mesh {
            cfg.noc.n = n;
        }
        if !self.pes.is_empty() {
            cfg.pes = self.pes.clone();
        }
        if !self.modes.is_empty() {
            cfg.modes = self.modes.clone();
        }
        if let Some(cap) = self.rounds_cap {
            cfg.rounds_cap = cap;
        }
        cfg.force_rounds |= self.force_rounds;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.event_log |= self.event_log;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Tables { common, meshes } => {
            let cfg = common.config()?;
            let tables = emit_tables(&cfg, &meshes)?;
            for (name, table) in &tables {
                println!("# {name}");
                print!("{}", table.to_csv());
                for note in table_footnotes(&cfg, table) {
                    println!("# {note}");
                }
            }
            for path in write_tables(&cfg, &tables, &cfg.out_dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Run { common } => {
            let cfg = common.config()?;
            let report = run_experiment(&cfg)?;
            let mut paths = vec![write_runs(&report, &cfg.out_dir)?];
            for (base, variant) in [(Mode::WsPlain, Mode::WsIna), (Mode::OsGather, Mode::WsIna)] {
                if cfg.modes.contains(&base) && cfg.modes.contains(&variant) {
                    paths.extend(write_comparison(&compare(&report, base, variant)?, &cfg, &cfg.out_dir)?);
                }
            }
            for r in report.runs.iter().filter(|r| !r.ok()) {
                eprintln!(
                    "{} {} E={} {}: {}",
                    r.workload,
                    r.layer.name,
                    r.pes,
                    r.mode,
                    r.error.as_deref().unwrap_or("")
                );
            }
            for path in paths {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Compare { common, baseline, variant } => {
            let mut cfg = common.config()?;
            cfg.modes = vec![baseline, variant];
            let report = run_experiment(&cfg)?;
            let cmp = compare(&report, baseline, variant)?;
            println!("workload,layer,E,parts,latency_ratio,energy_ratio");
            for r in &cmp.rows {
                println!(
                    "{},{},{},{},{:.6},{:.6}",
                    r.workload,
                    r.layer,
                    r.pes,
                    r.parts,
                    ratio_f64(r.latency),
                    ratio_f64(r.energy)
                );
            }
            for path in write_comparison(&cmp, &cfg, &cfg.out_dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Trace { common, layer, simulate } => {
            let cfg = common.config()?;
            let workload = load_workloads(&cfg)?.into_iter().next().ok_or("no workload given")?;
            let index = workload
                .layers
                .iter()
                .position(|l| l.name == layer)
                .ok_or_else(|| format!("{} has no layer `{layer}`", workload.name))?;
            let pes = cfg.pes[0];
            let mode = cfg.modes[0];
            MeshShape::new(cfg.noc.n as u32, pes)?;
            let sched = build_schedule(&cfg, &workload.layers[index], index, pes, mode)?;
            let path = cfg.out_dir.join(format!("trace_{}_{layer}_E{pes}_{mode}.csv", workload.name));
            let mut buf = Vec::new();
            write_trace(&sched, &mut buf)?;
            ina_noc::harness::write_atomic(&path, std::str::from_utf8(&buf)?)?;
            eprintln!("wrote {}", path.display());
            if simulate {
                let res = execute(&sched, &cfg.noc, false)?;
                println!("rounds {} of {}", sched.rounds.len(), sched.total_rounds);
                println!("cycles {}", res.cycles);
                println!("packets {}", res.stats.packets_delivered);
                println!("mean_latency {:.3}", res.stats.mean_latency());
                println!("outputs {}", res.outputs.len());
            }
        }
    }
    Ok(())
}
