//! Line-oriented trace files: `#` header lines carrying the schedule
//! metadata, then one CSV row per event.

use std::io::{BufRead, Write};

use thiserror::Error;

use super::{EventKind, Mode, Round, Schedule, TraceEvent};
use crate::analytic::{LayerShape, MeshShape};
use crate::noc::{ChainId, NodeAddress, PacketClass};

const COLUMNS: [&str; 16] = [
    "cycle", "src_x", "src_y", "class", "dst_x", "dst_y", "flits", "chain_id", "round", "kind", "hop", "macs", "slot",
    "taps", "words", "payload",
];

#[derive(Debug, Error)]
pub enum TraceFileError {
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace header: missing or bad `{0}`")]
    Header(&'static str),
    #[error("trace line {line}: {msg}")]
    Row { line: u64, msg: String },
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

pub fn write_trace<W: Write>(schedule: &Schedule, mut out: W) -> Result<(), TraceFileError> {
    let l = &schedule.layer;
    writeln!(out, "# layer={},{},{},{},{}", l.name, l.kernel, l.channels, l.filters, l.output)?;
    writeln!(out, "# mesh={},{}", schedule.mesh.n, schedule.mesh.pes_per_router)?;
    writeln!(out, "# mode={}", schedule.mode)?;
    writeln!(out, "# seed={}", schedule.seed)?;
    writeln!(out, "# stream_scale={}", schedule.stream_scale)?;
    writeln!(out, "# layer_index={}", schedule.layer_index)?;
    writeln!(out, "# parts={}", schedule.parts)?;
    writeln!(out, "# total_rounds={}", schedule.total_rounds)?;
    writeln!(out, "# rounds={}", schedule.rounds.len())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for e in schedule.events() {
        w.write_record([
            e.cycle.to_string(),
            e.src.x.to_string(),
            e.src.y.to_string(),
            e.class.name().to_string(),
            e.dst.x.to_string(),
            e.dst.y.to_string(),
            e.flits.to_string(),
            opt(e.chain),
            e.round.to_string(),
            e.kind.name().to_string(),
            e.hop.to_string(),
            e.macs.to_string(),
            opt(e.slot),
            join(e.taps.iter().map(|t| format!("{}:{}", t.x, t.y))),
            e.words.to_string(),
            join(&e.payload),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Default)]
struct Header {
    layer: Option<LayerShape>,
    mesh: Option<MeshShape>,
    mode: Option<Mode>,
    seed: Option<u64>,
    stream_scale: Option<u32>,
    layer_index: Option<u8>,
    parts: Option<u32>,
    total_rounds: Option<u64>,
    rounds: Option<u64>,
}

fn parse_header(line: &str, h: &mut Header) {
    let Some((key, value)) = line.trim_start_matches('#').trim().split_once('=') else {
        return;
    };
    let nums = |v: &str| v.split(',').map(|s| s.trim().parse::<u32>().ok()).collect::<Option<Vec<_>>>();
    match key.trim() {
        "layer" => {
            let mut parts = value.split(',');
            let name = parts.next().unwrap_or_default().to_string();
            if let Some(d) = nums(&parts.collect::<Vec<_>>().join(",")).filter(|d| d.len() == 4) {
                h.layer = Some(LayerShape::new(name, d[0], d[1], d[2], d[3]));
            }
        }
        "mesh" => {
            h.mesh = nums(value).filter(|d| d.len() == 2).and_then(|d| MeshShape::new(d[0], d[1]).ok());
        }
        "mode" => h.mode = Mode::parse(value.trim()),
        "seed" => h.seed = value.trim().parse().ok(),
        "stream_scale" => h.stream_scale = value.trim().parse().ok(),
        "layer_index" => h.layer_index = value.trim().parse().ok(),
        "parts" => h.parts = value.trim().parse().ok(),
        "total_rounds" => h.total_rounds = value.trim().parse().ok(),
        "rounds" => h.rounds = value.trim().parse().ok(),
        _ => {}
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T, TraceFileError> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| TraceFileError::Row { line, msg: format!("bad `{}`", COLUMNS[i]) })
}

fn opt_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<Option<T>, TraceFileError> {
    match rec.get(i) {
        Some("-") => Ok(None),
        _ => field(rec, i, line).map(Some),
    }
}

fn list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(';').map(|v| v.parse().ok()).collect()
}

fn parse_row(rec: &csv::StringRecord, line: u64) -> Result<TraceEvent, TraceFileError> {
    let bad = |msg: &str| TraceFileError::Row { line, msg: msg.to_string() };
    let class = PacketClass::parse(rec.get(3).unwrap_or_default()).ok_or_else(|| bad("bad `class`"))?;
    let kind = EventKind::parse(rec.get(9).unwrap_or_default()).ok_or_else(|| bad("bad `kind`"))?;
    let taps = list::<String>(rec.get(13).unwrap_or_default())
        .and_then(|v| {
            v.iter()
                .map(|t| {
                    let (x, y) = t.split_once(':')?;
                    Some(NodeAddress::new(x.parse().ok()?, y.parse().ok()?))
                })
                .collect::<Option<Vec<_>>>()
        })
        .ok_or_else(|| bad("bad `taps`"))?;
    Ok(TraceEvent {
        cycle: field(rec, 0, line)?,
        src: NodeAddress::new(field(rec, 1, line)?, field(rec, 2, line)?),
        class,
        dst: NodeAddress::new(field(rec, 4, line)?, field(rec, 5, line)?),
        flits: field(rec, 6, line)?,
        chain: opt_field::<u64>(rec, 7, line)?.map(ChainId),
        round: field(rec, 8, line)?,
        kind,
        hop: field(rec, 10, line)?,
        macs: field(rec, 11, line)?,
        slot: opt_field(rec, 12, line)?,
        taps,
        words: field(rec, 14, line)?,
        payload: list(rec.get(15).unwrap_or_default()).ok_or_else(|| bad("bad `payload`"))?,
    })
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Schedule, TraceFileError> {
    let mut header = Header::default();
    let mut body = String::new();
    let mut header_lines = 0u64;
    for line in input.lines() {
        let line = line?;
        if line.starts_with('#') {
            parse_header(&line, &mut header);
            header_lines += 1;
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let layer = header.layer.ok_or(TraceFileError::Header("layer"))?;
    let mesh = header.mesh.ok_or(TraceFileError::Header("mesh"))?;
    let mode = header.mode.ok_or(TraceFileError::Header("mode"))?;
    let seed = header.seed.ok_or(TraceFileError::Header("seed"))?;
    let stream_scale = header.stream_scale.ok_or(TraceFileError::Header("stream_scale"))?;
    let layer_index = header.layer_index.ok_or(TraceFileError::Header("layer_index"))?;
    let parts = header.parts.ok_or(TraceFileError::Header("parts"))?;
    let total_rounds = header.total_rounds.ok_or(TraceFileError::Header("total_rounds"))?;
    let count = header.rounds.ok_or(TraceFileError::Header("rounds"))?;
    let mut rounds: Vec<Round> = (0..count).map(|index| Round { index, events: Vec::new() }).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    for (i, rec) in reader.records().enumerate() {
        let line = header_lines + 2 + i as u64;
        let ev = parse_row(&rec?, line)?;
        let round = rounds
            .get_mut(ev.round as usize)
            .ok_or_else(|| TraceFileError::Row { line, msg: "round out of range".into() })?;
        round.events.push(ev);
    }
    Ok(Schedule { layer, mesh, mode, seed, stream_scale, layer_index, parts, total_rounds, rounds })
}
