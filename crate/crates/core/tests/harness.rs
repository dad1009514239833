use std::path::Path;
use std::process::Command;

use ina_noc::dataflow::Mode;
use ina_noc::harness::{
    compare, emit_tables, run_experiment, write_comparison, write_runs, write_tables, ExperimentConfig, RUNS_HEADER,
};
use num_rational::Ratio;

fn small_config(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        workloads: vec!["alexnet".into()],
        pes: vec![1, 4],
        rounds_cap: 2,
        out_dir: out.to_path_buf(),
        ..Default::default()
    }
}

fn write_all(cfg: &ExperimentConfig) -> Vec<Vec<u8>> {
    let report = run_experiment(cfg).unwrap();
    let mut paths = vec![write_runs(&report, &cfg.out_dir).unwrap()];
    for (b, v) in [(Mode::WsPlain, Mode::WsIna), (Mode::OsGather, Mode::WsIna)] {
        paths.extend(write_comparison(&compare(&report, b, v).unwrap(), cfg, &cfg.out_dir).unwrap());
    }
    paths.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

#[test]
fn runs_file_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.runs.len(), 5 * 2 * 3);
    assert!(report.runs.iter().all(|r| r.ok()));
    let text = std::fs::read_to_string(write_runs(&report, dir.path()).unwrap()).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# mesh=8x8 vcs=2 buffer_depth=4"));
    assert!(lines.next().unwrap().contains("stream_scale=32 coefficients=default"));
    assert_eq!(lines.next().unwrap(), RUNS_HEADER);
    let columns = RUNS_HEADER.split(',').count();
    for line in lines {
        assert_eq!(line.split(',').count(), columns, "{line}");
    }
    assert!(!dir.path().join("runs.csv.tmp").exists());
}

#[test]
fn sweeps_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg_a = small_config(a.path());
    let mut cfg_b = small_config(b.path());
    cfg_a.workloads = vec!["vgg16".into()];
    cfg_b.workloads = vec!["vgg16".into()];
    assert_eq!(write_all(&cfg_a), write_all(&cfg_b));
}

#[test]
fn single_part_layers_have_unit_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let layers = dir.path().join("tiny.csv");
    std::fs::write(&layers, "# name,R,C,F,O\nA,3,8,16,6\nB,1,32,24,5\n").unwrap();
    let mut cfg = small_config(dir.path());
    cfg.workloads = vec![layers.to_string_lossy().into_owned()];
    cfg.modes = vec![Mode::WsIna, Mode::WsPlain];
    let cmp = compare(&run_experiment(&cfg).unwrap(), Mode::WsPlain, Mode::WsIna).unwrap();
    assert_eq!(cmp.rows.len(), 4);
    for r in &cmp.rows {
        assert_eq!(r.workload, "tiny");
        assert_eq!((r.latency, r.energy), (Ratio::from_integer(1), Ratio::from_integer(1)));
    }
    assert!(cmp.summary_for("tiny", 1, "chained").is_none());
}

#[test]
fn missing_mode_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.modes = vec![Mode::WsIna];
    cfg.pes = vec![1];
    let report = run_experiment(&cfg).unwrap();
    assert!(compare(&report, Mode::OsGather, Mode::WsIna).is_err());
}

#[test]
fn unmappable_layers_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let layers = dir.path().join("wide.csv");
    std::fs::write(&layers, "wide,3,4096,8,2\nok,3,8,8,2\n").unwrap();
    let mut cfg = small_config(dir.path());
    cfg.workloads = vec![layers.to_string_lossy().into_owned()];
    cfg.pes = vec![1];
    let report = run_experiment(&cfg).unwrap();
    let failed: Vec<_> = report.runs.iter().filter(|r| !r.ok()).map(|r| (r.layer.name.as_str(), r.mode)).collect();
    assert_eq!(failed, vec![("wide", Mode::WsIna), ("wide", Mode::WsPlain)]);
}

#[test]
fn table_files_carry_footnotes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.workloads = vec!["vgg16".into()];
    let tables = emit_tables(&cfg, &[8, 16]).unwrap();
    let paths = write_tables(&cfg, &tables, dir.path()).unwrap();
    let text = std::fs::read_to_string(&paths[0]).unwrap();
    assert!(text.contains("# CONV3: fits in one PE, so no accumulation rounds; forced: N8=25088 N16=6272"));
    assert!(text.contains("CONV5,3,128,256,56,2,25088,6272"));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ina-noc")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = cli(&["tables", "--workload", "alexnet", "--out", out]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("CONV2,5,64,192,27,2,4374,1094"));
    assert!(dir.path().join("table_alexnet.csv").exists());

    let trace = cli(&[
        "trace",
        "--workload",
        "alexnet",
        "--layer",
        "CONV3",
        "--pes",
        "2",
        "--mode",
        "ws_plain",
        "--rounds-cap",
        "1",
        "--out",
        out,
        "--simulate",
    ]);
    assert!(trace.status.success(), "{}", String::from_utf8_lossy(&trace.stderr));
    assert!(dir.path().join("trace_alexnet_CONV3_E2_ws_plain.csv").exists());

    assert!(!cli(&["run", "--mode", "bogus"]).status.success());
    assert!(!cli(&["trace", "--workload", "alexnet", "--layer", "NOPE", "--out", out]).status.success());
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "pes = []\n").unwrap();
    let res = cli(&["run", "--config", bad.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("pes must list at least one value"));
}

#[test]
fn cli_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = cli(&["run", "--workload", "alexnet", "--pes", "2", "--rounds-cap", "1", "--out", out, "--event-log"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["runs.csv", "ratios_ws_plain_vs_ws_ina.csv", "summary_os_gather_vs_ws_ina.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let log = std::fs::read_to_string(dir.path().join("events/alexnet_CONV2_E2_ws_ina.log")).unwrap();
    assert!(log.lines().any(|l| l.contains(",INJECT,")));
}
