//! Delimiter-separated report files. Each starts with `#` metadata lines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Comparison, ExperimentConfig, HarnessError, RunReport};
use crate::analytic::TableReport;
use crate::noc::PacketClass;
use crate::power::{ratio_f64, Units};

pub const RUNS_HEADER: &str = "workload,layer,E,mode,parts,total_rounds,rounds,cycles,packets,flits,mean_latency,\
max_latency,buffer_write,buffer_read,crossbar,arbitration,link,ni_inject,ni_eject,ina_add,operand_latch,\
energy_total,energy_unicast,energy_stream,energy_ina_chain,energy_gather,error";

/// Writes `text` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(path.to_path_buf(), e.to_string());
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn metadata(cfg: &ExperimentConfig) -> String {
    let n = &cfg.noc;
    format!(
        "# mesh={}x{} vcs={} buffer_depth={} router_latency={} link_latency={} flit_width={}\n\
         # precision={} memory_bits={} rounds_cap={} seed={} stream_scale={} coefficients={}\n",
        n.n,
        n.n,
        n.vcs,
        n.buffer_depth,
        n.router_latency,
        n.link_latency,
        n.flit_width,
        cfg.precision,
        cfg.memory_bits,
        cfg.rounds_cap,
        cfg.seed,
        cfg.stream_scale,
        cfg.coefficient_set,
    )
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn runs_csv(report: &RunReport) -> String {
    let mut out = metadata(&report.config);
    out.push_str(RUNS_HEADER);
    out.push('\n');
    for r in &report.runs {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{:.3},{}",
            csv_field(&r.workload),
            csv_field(&r.layer.name),
            r.pes,
            r.mode,
            r.parts,
            r.total_rounds,
            r.rounds,
            r.cycles,
            r.packets,
            r.flits,
            r.mean_latency,
            r.max_latency
        );
        for c in r.counts.as_array() {
            let _ = write!(out, ",{c}");
        }
        let _ = write!(out, ",{}", Units(r.energy.total));
        for c in PacketClass::ALL {
            let _ = write!(out, ",{}", Units(r.energy.by_class[c.index()]));
        }
        let _ = writeln!(out, ",{}", csv_field(r.error.as_deref().unwrap_or("")));
    }
    out
}

pub fn write_runs(report: &RunReport, dir: &Path) -> Result<PathBuf, HarnessError> {
    let path = dir.join("runs.csv");
    write_atomic(&path, &runs_csv(report))?;
    Ok(path)
}

pub fn ratios_csv(cmp: &Comparison, cfg: &ExperimentConfig) -> String {
    let mut out = metadata(cfg);
    let _ = writeln!(out, "# ratio = {} / {}", cmp.baseline, cmp.variant);
    out.push_str("workload,layer,E,parts,latency_ratio,energy_ratio\n");
    for r in &cmp.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6}",
            csv_field(&r.workload),
            csv_field(&r.layer),
            r.pes,
            r.parts,
            ratio_f64(r.latency),
            ratio_f64(r.energy)
        );
    }
    out
}

pub fn summary_csv(cmp: &Comparison, cfg: &ExperimentConfig) -> String {
    let mut out = metadata(cfg);
    let _ = writeln!(out, "# ratio = {} / {}; workload * is every workload together", cmp.baseline, cmp.variant);
    out.push_str("workload,E,scope,layers,mean_latency_ratio,mean_energy_ratio,max_latency_ratio,max_energy_ratio\n");
    for s in &cmp.summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            csv_field(&s.workload),
            s.pes,
            s.scope,
            s.layers,
            s.mean_latency,
            s.mean_energy,
            s.max_latency,
            s.max_energy
        );
    }
    out
}

/// Writes `ratios_<baseline>_vs_<variant>.csv` and the matching summary.
pub fn write_comparison(cmp: &Comparison, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let stem = format!("{}_vs_{}", cmp.baseline, cmp.variant);
    let ratios = dir.join(format!("ratios_{stem}.csv"));
    let summary = dir.join(format!("summary_{stem}.csv"));
    write_atomic(&ratios, &ratios_csv(cmp, cfg))?;
    write_atomic(&summary, &summary_csv(cmp, cfg))?;
    Ok(vec![ratios, summary])
}

pub fn table_csv(cfg: &ExperimentConfig, table: &TableReport, notes: &[String]) -> String {
    let mut out =
        format!("# precision={} memory_bits={} force_rounds={}\n", cfg.precision, cfg.memory_bits, cfg.force_rounds);
    for n in notes {
        let _ = writeln!(out, "# {n}");
    }
    out.push_str(&table.to_csv());
    out
}

/// Writes one `table_<workload>.csv` per table.
pub fn write_tables(
    cfg: &ExperimentConfig,
    tables: &[(String, TableReport)],
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    tables
        .iter()
        .map(|(name, t)| {
            let path = dir.join(format!("table_{name}.csv"));
            write_atomic(&path, &table_csv(cfg, t, &super::table_footnotes(cfg, t)))?;
            Ok(path)
        })
        .collect()
}
