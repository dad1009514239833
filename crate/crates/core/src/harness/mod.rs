//! Experiment driver: sweeps layers, PE counts and modes, then pairs runs
//! into improvement ratios.

mod config;
mod report;

pub use config::ExperimentConfig;
pub use report::{write_atomic, write_comparison, write_runs, write_tables, RUNS_HEADER};

use std::path::PathBuf;

use num_rational::Ratio;
use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{self, LayerShape, MeshShape, Rounds, TableReport};
use crate::dataflow::{gen_os_trace, gen_ws_trace, GenOptions, Mode, Schedule};
use crate::exec::execute;
use crate::noc::EventCounts;
use crate::power::{self, EnergyReport, RunMeta};
use crate::workload::{self, Workload};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(PathBuf, String),
    #[error(transparent)]
    Workload(#[from] workload::WorkloadError),
    #[error("mode `{0}` was not part of the sweep")]
    MissingMode(Mode),
}

/// One simulated (layer, PEs per router, mode) point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub workload: String,
    pub layer: LayerShape,
    pub pes: u32,
    pub mode: Mode,
    pub parts: u64,
    pub total_rounds: u64,
    pub rounds: u64,
    pub cycles: u64,
    pub packets: u64,
    pub flits: u64,
    pub mean_latency: f64,
    pub max_latency: u64,
    pub counts: EventCounts,
    pub energy: EnergyReport,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
}

impl RunReport {
    pub fn find(&self, workload: &str, layer: &str, pes: u32, mode: Mode) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.workload == workload && r.layer.name == layer && r.pes == pes && r.mode == mode)
    }
}

struct Job<'a> {
    workload: &'a str,
    index: usize,
    layer: &'a LayerShape,
    pes: u32,
    mode: Mode,
}

pub fn load_workloads(cfg: &ExperimentConfig) -> Result<Vec<Workload>, HarnessError> {
    cfg.workloads.iter().map(|w| workload::load(w).map_err(HarnessError::from)).collect()
}

/// Options shared by every schedule of one (layer, E) point.
pub fn gen_options(cfg: &ExperimentConfig, mesh: MeshShape, layer_index: usize) -> Result<GenOptions, HarnessError> {
    let mut opts = GenOptions::new(mesh).with_cap(cfg.cap()).with_seed(cfg.seed).with_stream_scale(cfg.stream_scale);
    opts.q = cfg.precision()?;
    opts.mem = cfg.memory()?;
    opts.flit_width = cfg.noc.flit_width;
    opts.layer_index = layer_index as u8;
    Ok(opts)
}

/// Output activations the capped WS schedule covers; OS runs are capped to
/// the same amount of work so cycle counts compare like for like.
fn ws_covered_items(layer: &LayerShape, opts: &GenOptions) -> u64 {
    let total = layer.filters as u64 * layer.output_pixels();
    let n = opts.mesh.n as u64;
    let parts = analytic::pe_count(layer, opts.q, opts.mem).clamp(1, n);
    let per_round = n * opts.mesh.pes_per_router as u64 * (n / parts);
    opts.rounds_cap.map_or(total, |cap| (cap * per_round).min(total))
}

/// Builds the schedule a sweep simulates for one point.
pub fn build_schedule(
    cfg: &ExperimentConfig,
    layer: &LayerShape,
    layer_index: usize,
    pes: u32,
    mode: Mode,
) -> Result<Schedule, String> {
    let mesh = MeshShape::new(cfg.noc.n as u32, pes).map_err(|e| e.to_string())?;
    let opts = gen_options(cfg, mesh, layer_index).map_err(|e| e.to_string())?;
    let sched = match mode {
        Mode::WsIna | Mode::WsPlain => gen_ws_trace(layer, &opts, mode.ina()),
        Mode::OsGather => {
            let per_round = mesh.n as u64 * mesh.n as u64 * pes as u64;
            let cap = opts.rounds_cap.map(|_| ws_covered_items(layer, &opts).div_ceil(per_round));
            gen_os_trace(layer, &opts.clone().with_cap(cap))
        }
    };
    sched.map_err(|e| e.to_string())
}

fn run_job(cfg: &ExperimentConfig, job: &Job<'_>) -> RunRecord {
    let meta = RunMeta {
        layer: job.layer.name.clone(),
        mesh: cfg.noc.n as u32,
        pes_per_router: job.pes,
        mode: job.mode.name().into(),
        coefficients: cfg.coefficient_set.clone(),
    };
    let mut rec = RunRecord {
        workload: job.workload.to_string(),
        layer: job.layer.clone(),
        pes: job.pes,
        mode: job.mode,
        parts: cfg.precision().map_or(0, |q| analytic::pe_count(job.layer, q, cfg.memory().unwrap_or_default())),
        total_rounds: 0,
        rounds: 0,
        cycles: 0,
        packets: 0,
        flits: 0,
        mean_latency: 0.0,
        max_latency: 0,
        counts: EventCounts::default(),
        energy: EnergyReport { meta: meta.clone(), ..Default::default() },
        error: None,
    };
    let sched = match build_schedule(cfg, job.layer, job.index, job.pes, job.mode) {
        Ok(s) => s,
        Err(e) => {
            rec.error = Some(e);
            return rec;
        }
    };
    rec.total_rounds = sched.total_rounds;
    rec.rounds = sched.rounds.len() as u64;
    let res = match execute(&sched, &cfg.noc, cfg.event_log) {
        Ok(r) => r,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let s = &res.stats;
    if s.packets_injected != s.packets_delivered || s.max_buffer_occupancy > cfg.noc.buffer_depth {
        rec.error = Some(format!(
            "conservation violated: {} injected, {} delivered, max occupancy {}",
            s.packets_injected, s.packets_delivered, s.max_buffer_occupancy
        ));
    }
    if cfg.event_log {
        let name = format!("{}_{}_E{}_{}.log", job.workload, job.layer.name, job.pes, job.mode);
        let path = cfg.out_dir.join("events").join(name);
        if let Err(e) = write_atomic(&path, &(res.event_log.join("\n") + "\n")) {
            rec.error = Some(e.to_string());
        }
    }
    rec.cycles = res.cycles;
    rec.packets = s.packets_delivered;
    rec.flits = s.flits_retired;
    rec.mean_latency = s.mean_latency();
    rec.max_latency = s.max_latency();
    rec.counts = s.total;
    rec.energy = power::tally(s, &cfg.coefficients, meta);
    rec
}

/// Runs every (workload layer, PEs per router, mode) point. Failures are
/// recorded per run instead of aborting the sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let workloads = load_workloads(cfg)?;
    let mut jobs = Vec::new();
    for w in &workloads {
        for (index, layer) in w.layers.iter().enumerate() {
            for &pes in &cfg.pes {
                for &mode in &cfg.modes {
                    jobs.push(Job { workload: &w.name, index, layer, pes, mode });
                }
            }
        }
    }
    let runs = jobs.par_iter().map(|j| run_job(cfg, j)).collect();
    Ok(RunReport { config: cfg.clone(), runs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub workload: String,
    pub layer: String,
    pub pes: u32,
    pub parts: u64,
    pub latency: Ratio<i128>,
    pub energy: Ratio<i128>,
}

/// Mean ratios over one workload (or all, as `*`) at one PE count.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub workload: String,
    pub pes: u32,
    /// `all` layers, or only `chained` ones (filters split over 2+ PEs).
    pub scope: &'static str,
    pub layers: usize,
    pub mean_latency: f64,
    pub mean_energy: f64,
    pub max_latency: f64,
    pub max_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline: Mode,
    pub variant: Mode,
    pub rows: Vec<RatioRow>,
    pub summary: Vec<SummaryRow>,
}

impl Comparison {
    pub fn summary_for(&self, workload: &str, pes: u32, scope: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.workload == workload && s.pes == pes && s.scope == scope)
    }
}

fn summarize(workload: &str, pes: u32, scope: &'static str, rows: &[&RatioRow]) -> Option<SummaryRow> {
    if rows.is_empty() {
        return None;
    }
    let lat: Vec<f64> = rows.iter().map(|r| power::ratio_f64(r.latency)).collect();
    let en: Vec<f64> = rows.iter().map(|r| power::ratio_f64(r.energy)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().copied().fold(f64::MIN, f64::max);
    Some(SummaryRow {
        workload: workload.to_string(),
        pes,
        scope,
        layers: rows.len(),
        mean_latency: mean(&lat),
        mean_energy: mean(&en),
        max_latency: max(&lat),
        max_energy: max(&en),
    })
}

/// Pairs `baseline` and `variant` runs of the same layer and PE count;
/// ratios are baseline over variant.
pub fn compare(report: &RunReport, baseline: Mode, variant: Mode) -> Result<Comparison, HarnessError> {
    for m in [baseline, variant] {
        if !report.config.modes.contains(&m) {
            return Err(HarnessError::MissingMode(m));
        }
    }
    let mut rows = Vec::new();
    for b in report.runs.iter().filter(|r| r.mode == baseline && r.ok()) {
        let Some(v) = report.find(&b.workload, &b.layer.name, b.pes, variant).filter(|v| v.ok()) else {
            continue;
        };
        let (Ok(latency), Ok(energy)) =
            (power::latency_improvement(b.cycles, v.cycles), power::improvement(&b.energy, &v.energy))
        else {
            continue;
        };
        rows.push(RatioRow {
            workload: b.workload.clone(),
            layer: b.layer.name.clone(),
            pes: b.pes,
            parts: b.parts,
            latency,
            energy,
        });
    }
    let mut workloads: Vec<String> = Vec::new();
    for r in &rows {
        if !workloads.contains(&r.workload) {
            workloads.push(r.workload.clone());
        }
    }
    let mut summary = Vec::new();
    for &pes in &report.config.pes {
        for w in workloads.iter().map(String::as_str).chain(std::iter::once("*")) {
            let at: Vec<&RatioRow> = rows.iter().filter(|r| r.pes == pes && (w == "*" || r.workload == w)).collect();
            let chained: Vec<&RatioRow> = at.iter().copied().filter(|r| r.parts >= 2).collect();
            summary.extend(summarize(w, pes, "all", &at));
            summary.extend(summarize(w, pes, "chained", &chained));
        }
    }
    Ok(Comparison { baseline, variant, rows, summary })
}

/// Analytic round tables for each workload at each mesh side.
pub fn emit_tables(cfg: &ExperimentConfig, meshes: &[u32]) -> Result<Vec<(String, TableReport)>, HarnessError> {
    let q = cfg.precision()?;
    let mem = cfg.memory()?;
    let shapes: Vec<MeshShape> = meshes
        .iter()
        .map(|&n| MeshShape::new(n, 1).map_err(|e| HarnessError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(load_workloads(cfg)?
        .into_iter()
        .map(|w| (w.name, analytic::table_report(&w.layers, &shapes, q, mem, cfg.force_rounds)))
        .collect())
}

/// Rows of a table that read NA only because the layer fits in one PE,
/// with the counts forcing the formula would give.
pub fn table_footnotes(cfg: &ExperimentConfig, table: &TableReport) -> Vec<String> {
    let (Ok(q), Ok(mem)) = (cfg.precision(), cfg.memory()) else { return Vec::new() };
    table
        .rows
        .iter()
        .filter(|row| row.rounds.iter().any(|c| matches!(c, Ok(Rounds::NotApplicable))))
        .map(|row| {
            let forced: Vec<String> = table
                .meshes
                .iter()
                .map(|&m| match analytic::plan(&row.layer, m, q, mem, true) {
                    Ok(p) => format!("N{}={}", m.n, p.rounds),
                    Err(_) => format!("N{}=ERR", m.n),
                })
                .collect();
            format!("{}: fits in one PE, so no accumulation rounds; forced: {}", row.layer.name, forced.join(" "))
        })
        .collect()
}
