//! Weight- and output-stationary schedules for one CONV layer.
//!
//! A [`Schedule`] is a list of rounds; each round lists the packets and
//! compute steps it needs. Stream events are released when the round starts;
//! everything else is released by its dependencies (see [`crate::exec`]).

mod trace_file;
pub mod values;

pub use trace_file::{read_trace, write_trace, TraceFileError};

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{self, AnalyticError, LayerShape, MeshShape, PeMemory, Precision};
use crate::noc::{flit_count, ChainId, NodeAddress, PacketClass};
use values::SyntheticValues;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataflowError {
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("stream scale must be >= 1")]
    StreamScale,
    #[error("synthetic chain needs 1..={max} intermediate nodes on this mesh, got {k}")]
    ChainLength { k: u32, max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    WsIna,
    WsPlain,
    OsGather,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::WsIna, Mode::WsPlain, Mode::OsGather];

    pub fn name(self) -> &'static str {
        match self {
            Mode::WsIna => "ws_ina",
            Mode::WsPlain => "ws_plain",
            Mode::OsGather => "os_gather",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn ina(self) -> bool {
        self == Mode::WsIna
    }

    pub fn output_stationary(self) -> bool {
        self == Mode::OsGather
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Weight,
    Input,
    /// A PE computes `macs` MACs and produces `payload` (one word per PE).
    Operand,
    Psum,
    Gather,
}

impl EventKind {
    pub const ALL: [EventKind; 5] =
        [EventKind::Weight, EventKind::Input, EventKind::Operand, EventKind::Psum, EventKind::Gather];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Weight => "weight",
            EventKind::Input => "input",
            EventKind::Operand => "operand",
            EventKind::Psum => "psum",
            EventKind::Gather => "gather",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_stream(self) -> bool {
        matches!(self, EventKind::Weight | EventKind::Input)
    }

    pub fn is_packet(self) -> bool {
        self != EventKind::Operand
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    /// Earliest release, relative to the start of the round.
    pub cycle: u64,
    pub round: u64,
    pub kind: EventKind,
    pub class: PacketClass,
    pub src: NodeAddress,
    pub dst: NodeAddress,
    /// Zero for operand events.
    pub flits: u16,
    pub chain: Option<ChainId>,
    /// Position of the node along its chain (0 = initiator).
    pub hop: u16,
    pub macs: u32,
    /// Gather slot the node's final result occupies, if it has one.
    pub slot: Option<u16>,
    /// Intermediate routers that copy a multicast stream.
    pub taps: Vec<NodeAddress>,
    /// Payload words represented by the packet (streams carry counts only).
    pub words: u32,
    pub payload: Vec<u32>,
}

impl TraceEvent {
    fn packet(
        round: u64,
        kind: EventKind,
        class: PacketClass,
        src: NodeAddress,
        dst: NodeAddress,
        words: u32,
        fw: u32,
    ) -> Self {
        Self {
            cycle: 0,
            round,
            kind,
            class,
            src,
            dst,
            flits: flit_count(words, fw),
            chain: None,
            hop: 0,
            macs: 0,
            slot: None,
            taps: Vec::new(),
            words,
            payload: Vec::new(),
        }
    }

    fn operand(round: u64, node: NodeAddress, macs: u32, payload: Vec<u32>) -> Self {
        Self {
            cycle: 0,
            round,
            kind: EventKind::Operand,
            class: PacketClass::Unicast,
            src: node,
            dst: node,
            flits: 0,
            chain: None,
            hop: 0,
            macs,
            slot: None,
            taps: Vec::new(),
            words: payload.len() as u32,
            payload,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub index: u64,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub layer: LayerShape,
    pub mesh: MeshShape,
    pub mode: Mode,
    pub seed: u64,
    pub stream_scale: u32,
    pub layer_index: u8,
    /// PEs sharing one filter.
    pub parts: u32,
    /// Rounds the whole layer needs; `rounds` may hold fewer when capped.
    pub total_rounds: u64,
    pub rounds: Vec<Round>,
}

impl Schedule {
    pub fn events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.rounds.iter().flat_map(|r| r.events.iter())
    }

    /// Output activation (filter, pixel) held at each (round, gather row,
    /// slot) of the simulated rounds.
    pub fn gather_items(&self) -> HashMap<(u64, u16, u16), (u32, u32)> {
        let n = self.mesh.n as u64;
        let e = self.mesh.pes_per_router as u64;
        let rounds = self.rounds.len() as u64;
        let mut out = HashMap::new();
        match self.mode {
            Mode::OsGather => {
                let per_round = n * n * e;
                for (i, item) in os_items(&self.layer, self.mesh, rounds * per_round).into_iter().enumerate() {
                    let i = i as u64;
                    let pe = i % per_round;
                    out.insert((i / per_round, (pe / (n * e)) as u16, (pe % (n * e)) as u16), item);
                }
            }
            _ => {
                let map = WsMap::new(&self.layer, self.mesh, self.parts);
                let p = self.parts as u64;
                for i in 0..(rounds * map.slots).min(map.total) {
                    let s = i % map.slots;
                    let row = (s / (n * e) + 1) * p - 1;
                    out.insert((i / map.slots, row as u16, (s % (n * e)) as u16), map.item(i).unwrap());
                }
            }
        }
        out
    }
}

/// Weight elements of one filter split over column-adjacent PEs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    /// Elements per filter (`C * R * R`).
    pub elements: u32,
    /// Elements one PE can hold.
    pub capacity: u32,
    /// Half-open element ranges, one per part, south to north.
    pub ranges: Vec<(u32, u32)>,
}

impl PartitionPlan {
    pub fn parts(&self) -> u32 {
        self.ranges.len() as u32
    }

    pub fn part_len(&self, p: u32) -> u32 {
        let (lo, hi) = self.ranges[p as usize];
        hi - lo
    }

    /// Node holding part `p` of the filters in lane column `col`, group `group`.
    pub fn node(&self, col: u16, group: u32, p: u32) -> NodeAddress {
        NodeAddress::new(col, (group * self.parts() + p) as u16)
    }
}

/// Splits each filter into full-capacity parts plus a remainder.
pub fn split_weights(
    layer: &LayerShape,
    q: Precision,
    mem: PeMemory,
    mesh: MeshShape,
) -> Result<PartitionPlan, DataflowError> {
    layer.validate()?;
    let parts = analytic::pe_count(layer, q, mem);
    if parts > mesh.n as u64 {
        return Err(AnalyticError::Unmappable { name: layer.name.clone(), parts, n: mesh.n }.into());
    }
    let elements = layer.filter_elements() as u32;
    let capacity = mem.capacity(q).min(elements as u64) as u32;
    let ranges = (0..parts as u32).map(|p| (p * capacity, ((p + 1) * capacity).min(elements))).collect();
    Ok(PartitionPlan { elements, capacity, ranges })
}

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub mesh: MeshShape,
    pub q: Precision,
    pub mem: PeMemory,
    pub flit_width: u32,
    pub rounds_cap: Option<u64>,
    pub seed: u64,
    /// Tensor elements represented by one stream payload word; 1 models
    /// streams element for element.
    pub stream_scale: u32,
    /// Distinguishes layers in chain ids.
    pub layer_index: u8,
}

impl GenOptions {
    pub fn new(mesh: MeshShape) -> Self {
        Self {
            mesh,
            q: Precision::default(),
            mem: PeMemory::default(),
            flit_width: 128,
            rounds_cap: None,
            seed: 1,
            stream_scale: 1,
            layer_index: 0,
        }
    }

    pub fn with_cap(mut self, cap: Option<u64>) -> Self {
        self.rounds_cap = cap;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stream_scale(mut self, scale: u32) -> Self {
        self.stream_scale = scale;
        self
    }

    fn stream_words(&self, elements: u64) -> u32 {
        elements.div_ceil(self.stream_scale as u64) as u32
    }
}

fn ws_slots(mesh: MeshShape, parts: u32) -> u64 {
    mesh.n as u64 * mesh.pes_per_router as u64 * (mesh.n as u64 / parts as u64)
}

/// Flat packing of (filter, pixel) items into WS round slots. Items run
/// pixel-major inside each set of `N*E` filters so that one group of lanes
/// shares an input patch.
struct WsMap {
    filters: u64,
    pixels: u64,
    lanes: u64,
    slots: u64,
    total: u64,
}

impl WsMap {
    fn new(layer: &LayerShape, mesh: MeshShape, parts: u32) -> Self {
        let lanes = mesh.n as u64 * mesh.pes_per_router as u64;
        let filters = layer.filters as u64;
        let pixels = layer.output_pixels();
        Self { filters, pixels, lanes, slots: ws_slots(mesh, parts), total: filters * pixels }
    }

    fn item(&self, i: u64) -> Option<(u32, u32)> {
        if i >= self.total {
            return None;
        }
        let set = i / (self.lanes * self.pixels);
        let j = i % (self.lanes * self.pixels);
        let in_set = self.lanes.min(self.filters - set * self.lanes);
        Some(((set * self.lanes + j % in_set) as u32, (j / in_set) as u32))
    }
}

/// The first `limit` OS items: filter blocks of `N*E` by pixel blocks of
/// `N`, laid out so rows share filters and columns share pixels.
fn os_items(layer: &LayerShape, mesh: MeshShape, limit: u64) -> Vec<(u32, u32)> {
    let n = mesh.n as u64;
    let e = mesh.pes_per_router as u64;
    let f_total = layer.filters as u64;
    let p_total = layer.output_pixels();
    let mut out = Vec::new();
    'outer: for fb in 0..f_total.div_ceil(n * e) {
        for pb in 0..p_total.div_ceil(n) {
            for y in 0..n {
                for x in 0..n {
                    for pe in 0..e {
                        let f = fb * n * e + y * e + pe;
                        let p = pb * n + x;
                        if f < f_total && p < p_total {
                            if out.len() as u64 >= limit {
                                break 'outer;
                            }
                            out.push((f as u32, p as u32));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Weight-stationary schedule. Each filter's parts sit on adjacent rows of
/// one column; partial sums flow south to north and the last part's row
/// gathers results eastward.
pub fn gen_ws_trace(layer: &LayerShape, opts: &GenOptions, ina: bool) -> Result<Schedule, DataflowError> {
    if opts.stream_scale == 0 {
        return Err(DataflowError::StreamScale);
    }
    let plan = split_weights(layer, opts.q, opts.mem, opts.mesh)?;
    let mesh = opts.mesh;
    let n = mesh.n as u16;
    let e = mesh.pes_per_router;
    let fw = opts.flit_width;
    let parts = plan.parts();
    let groups = n as u32 / parts;
    let map = WsMap::new(layer, mesh, parts);
    let total_rounds = map.total.div_ceil(map.slots);
    let simulated = opts.rounds_cap.map_or(total_rounds, |c| c.min(total_rounds));
    let vals = SyntheticValues::new(layer, opts.seed);
    let lanes = map.lanes as usize;
    // Filter currently resident in each PE, indexed [row][col * E + e].
    let mut held: Vec<Vec<Option<u32>>> = vec![vec![None; lanes]; n as usize];
    let mut rounds = Vec::with_capacity(simulated as usize);

    for r in 0..simulated {
        let mut events = Vec::new();
        let mut psums = Vec::new();
        let mut gathers = Vec::new();
        for g in 0..groups {
            let items: Vec<Option<(u32, u32)>> =
                (0..lanes as u64).map(|lane| map.item(r * map.slots + g as u64 * map.lanes + lane)).collect();
            if items.iter().all(Option::is_none) {
                continue;
            }
            let active_col = |c: u16| (0..e as usize).any(|pe| items[c as usize * e as usize + pe].is_some());
            for p in 0..parts {
                let node_row = (g * parts + p) as u16;
                let part_len = plan.part_len(p);
                let (lo, hi) = plan.ranges[p as usize];
                let west = NodeAddress::new(0, node_row);
                for c in 0..n {
                    let changed = (0..e as usize)
                        .filter(|&pe| {
                            let lane = c as usize * e as usize + pe;
                            match items[lane] {
                                Some((f, _)) if held[node_row as usize][lane] != Some(f) => {
                                    held[node_row as usize][lane] = Some(f);
                                    true
                                }
                                _ => false,
                            }
                        })
                        .count() as u64;
                    if changed > 0 {
                        let words = opts.stream_words(changed * part_len as u64);
                        events.push(TraceEvent::packet(
                            r,
                            EventKind::Weight,
                            PacketClass::Stream,
                            west,
                            NodeAddress::new(c, node_row),
                            words,
                            fw,
                        ));
                    }
                }
                let mut by_pixel: BTreeMap<u32, Vec<u16>> = BTreeMap::new();
                for (lane, item) in items.iter().enumerate() {
                    if let Some((_, pix)) = item {
                        let col = (lane / e as usize) as u16;
                        let cols = by_pixel.entry(*pix).or_default();
                        if cols.last() != Some(&col) {
                            cols.push(col);
                        }
                    }
                }
                for cols in by_pixel.values() {
                    let dst = NodeAddress::new(*cols.last().unwrap(), node_row);
                    let mut ev = TraceEvent::packet(
                        r,
                        EventKind::Input,
                        PacketClass::Stream,
                        west,
                        dst,
                        opts.stream_words(part_len as u64),
                        fw,
                    );
                    ev.taps = cols[..cols.len() - 1].iter().map(|&c| NodeAddress::new(c, node_row)).collect();
                    events.push(ev);
                }
                for c in (0..n).filter(|&c| active_col(c)) {
                    let payload: Vec<u32> = (0..e as usize)
                        .map(|pe| match items[c as usize * e as usize + pe] {
                            Some((f, pix)) => vals.partial_sum(f, pix, lo, hi),
                            None => 0,
                        })
                        .collect();
                    let mut ev = TraceEvent::operand(r, NodeAddress::new(c, node_row), part_len, payload);
                    ev.hop = p as u16;
                    if parts > 1 {
                        ev.chain = Some(chain_id(opts.layer_index, &items, c, e, r));
                    }
                    if p + 1 == parts {
                        ev.slot = Some(c * e as u16);
                    }
                    events.push(ev);
                }
            }
            let end_row = ((g + 1) * parts - 1) as u16;
            if parts > 1 {
                let words = e;
                for c in (0..n).filter(|&c| active_col(c)) {
                    let chain = chain_id(opts.layer_index, &items, c, e, r);
                    let init = plan.node(c, g, 0);
                    let init_words = events
                        .iter()
                        .find(|ev| ev.kind == EventKind::Operand && ev.src == init && ev.round == r)
                        .map(|ev| ev.payload.clone())
                        .unwrap_or_default();
                    if ina {
                        let mut ev = TraceEvent::packet(
                            r,
                            EventKind::Psum,
                            PacketClass::InaChain,
                            init,
                            plan.node(c, g, parts - 1),
                            words,
                            fw,
                        );
                        ev.chain = Some(chain);
                        ev.payload = init_words;
                        psums.push(ev);
                    } else {
                        for h in 0..parts - 1 {
                            let mut ev = TraceEvent::packet(
                                r,
                                EventKind::Psum,
                                PacketClass::Unicast,
                                plan.node(c, g, h),
                                plan.node(c, g, h + 1),
                                words,
                                fw,
                            );
                            ev.chain = Some(chain);
                            ev.hop = h as u16;
                            if h == 0 {
                                ev.payload = init_words.clone();
                            }
                            psums.push(ev);
                        }
                    }
                }
            }
            let mut ev = TraceEvent::packet(
                r,
                EventKind::Gather,
                PacketClass::Gather,
                NodeAddress::new(0, end_row),
                NodeAddress::new(n - 1, end_row),
                n as u32 * e,
                fw,
            );
            ev.chain = Some(ChainId::gather(opts.layer_index, end_row, r));
            gathers.push(ev);
        }
        events.extend(psums);
        events.extend(gathers);
        rounds.push(Round { index: r, events });
    }
    Ok(Schedule {
        layer: layer.clone(),
        mesh,
        mode: if ina { Mode::WsIna } else { Mode::WsPlain },
        seed: opts.seed,
        stream_scale: opts.stream_scale,
        layer_index: opts.layer_index,
        parts,
        total_rounds,
        rounds,
    })
}

fn chain_id(layer: u8, items: &[Option<(u32, u32)>], col: u16, e: u32, round: u64) -> ChainId {
    let (f, pix) = (0..e as usize)
        .find_map(|pe| items[col as usize * e as usize + pe])
        .expect("chains exist only for active columns");
    ChainId::new(layer, f, pix, round)
}

/// Output-stationary schedule: each PE owns whole output activations;
/// weights stream along rows from the west edge and inputs along columns
/// from the south edge every round.
pub fn gen_os_trace(layer: &LayerShape, opts: &GenOptions) -> Result<Schedule, DataflowError> {
    layer.validate()?;
    if opts.stream_scale == 0 {
        return Err(DataflowError::StreamScale);
    }
    let mesh = opts.mesh;
    let n = mesh.n as u16;
    let e = mesh.pes_per_router;
    let fw = opts.flit_width;
    let per_round = n as u64 * n as u64 * e as u64;
    let total = layer.filters as u64 * layer.output_pixels();
    let total_rounds = total.div_ceil(per_round);
    let simulated = opts.rounds_cap.map_or(total_rounds, |c| c.min(total_rounds));
    let items = os_items(layer, mesh, simulated * per_round);
    let m = layer.filter_elements();
    let vals = SyntheticValues::new(layer, opts.seed);
    let mut rounds = Vec::with_capacity(simulated as usize);

    for r in 0..simulated {
        let start = (r * per_round) as usize;
        let slice = &items[start..(start + per_round as usize).min(items.len())];
        let at = |x: u16, y: u16, pe: u32| -> Option<(u32, u32)> {
            slice.get(((y as u64 * n as u64 + x as u64) * e as u64 + pe as u64) as usize).copied()
        };
        let mut events = Vec::new();
        for y in 0..n {
            let mut filters = Vec::new();
            let mut cols = Vec::new();
            for x in 0..n {
                let fs: Vec<u32> = (0..e).filter_map(|pe| at(x, y, pe).map(|it| it.0)).collect();
                if !fs.is_empty() {
                    cols.push(x);
                }
                for f in fs {
                    if !filters.contains(&f) {
                        filters.push(f);
                    }
                }
            }
            if let Some(&last) = cols.last() {
                let mut ev = TraceEvent::packet(
                    r,
                    EventKind::Weight,
                    PacketClass::Stream,
                    NodeAddress::new(0, y),
                    NodeAddress::new(last, y),
                    opts.stream_words(filters.len() as u64 * m),
                    fw,
                );
                ev.taps = cols[..cols.len() - 1].iter().map(|&x| NodeAddress::new(x, y)).collect();
                events.push(ev);
            }
        }
        for x in 0..n {
            let mut pixels = Vec::new();
            let mut rows = Vec::new();
            for y in 0..n {
                let ps: Vec<u32> = (0..e).filter_map(|pe| at(x, y, pe).map(|it| it.1)).collect();
                if !ps.is_empty() {
                    rows.push(y);
                }
                for p in ps {
                    if !pixels.contains(&p) {
                        pixels.push(p);
                    }
                }
            }
            if let Some(&last) = rows.last() {
                let mut ev = TraceEvent::packet(
                    r,
                    EventKind::Input,
                    PacketClass::Stream,
                    NodeAddress::new(x, 0),
                    NodeAddress::new(x, last),
                    opts.stream_words(pixels.len() as u64 * m),
                    fw,
                );
                ev.taps = rows[..rows.len() - 1].iter().map(|&y| NodeAddress::new(x, y)).collect();
                events.push(ev);
            }
        }
        let mut gathers = Vec::new();
        for y in 0..n {
            let mut any = false;
            for x in 0..n {
                if (0..e).all(|pe| at(x, y, pe).is_none()) {
                    continue;
                }
                any = true;
                let payload =
                    (0..e).map(|pe| at(x, y, pe).map_or(0, |(f, p)| vals.partial_sum(f, p, 0, m as u32))).collect();
                let mut ev = TraceEvent::operand(r, NodeAddress::new(x, y), m as u32, payload);
                ev.slot = Some(x * e as u16);
                events.push(ev);
            }
            if any {
                let mut ev = TraceEvent::packet(
                    r,
                    EventKind::Gather,
                    PacketClass::Gather,
                    NodeAddress::new(0, y),
                    NodeAddress::new(n - 1, y),
                    n as u32 * e,
                    fw,
                );
                ev.chain = Some(ChainId::gather(opts.layer_index, y, r));
                gathers.push(ev);
            }
        }
        events.extend(gathers);
        rounds.push(Round { index: r, events });
    }
    Ok(Schedule {
        layer: layer.clone(),
        mesh,
        mode: Mode::OsGather,
        seed: opts.seed,
        stream_scale: opts.stream_scale,
        layer_index: opts.layer_index,
        parts: 1,
        total_rounds,
        rounds,
    })
}

/// A lone accumulation chain up column 0: an initiator at (0,0), `k`
/// accumulating nodes above it, and a sink at (0,k+1) that only ejects.
pub fn synthetic_chain(
    k: u32,
    operands: &[u32],
    mesh: MeshShape,
    flit_width: u32,
    ina: bool,
) -> Result<Schedule, DataflowError> {
    let max = mesh.n - 2;
    if k == 0 || k > max || operands.len() != k as usize + 1 {
        return Err(DataflowError::ChainLength { k, max });
    }
    let chain = ChainId::new(0, 0, 0, 0);
    let node = |h: u32| NodeAddress::new(0, h as u16);
    let mut events = Vec::new();
    for h in 0..=k {
        let mut ev = TraceEvent::operand(0, node(h), 0, vec![operands[h as usize]]);
        ev.chain = Some(chain);
        ev.hop = h as u16;
        events.push(ev);
    }
    if ina {
        let mut ev = TraceEvent::packet(0, EventKind::Psum, PacketClass::InaChain, node(0), node(k + 1), 1, flit_width);
        ev.chain = Some(chain);
        ev.payload = vec![operands[0]];
        events.push(ev);
    } else {
        for h in 0..=k {
            let mut ev =
                TraceEvent::packet(0, EventKind::Psum, PacketClass::Unicast, node(h), node(h + 1), 1, flit_width);
            ev.chain = Some(chain);
            ev.hop = h as u16;
            if h == 0 {
                ev.payload = vec![operands[0]];
            }
            events.push(ev);
        }
    }
    Ok(Schedule {
        layer: LayerShape::new("chain", 1, 1, 1, 1),
        mesh,
        mode: if ina { Mode::WsIna } else { Mode::WsPlain },
        seed: 0,
        stream_scale: 1,
        layer_index: 0,
        parts: k + 1,
        total_rounds: 1,
        rounds: vec![Round { index: 0, events }],
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassVolume {
    pub packets: u64,
    pub flits: u64,
    pub words: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceVolume {
    pub by_class: [ClassVolume; 4],
    /// Packets injected through NIs (every packet event).
    pub ni_injects: u64,
    /// Packet copies leaving through NIs (destinations plus taps), counting
    /// chain packets that retire into a gather slot as not ejected.
    pub ni_ejects: u64,
}

impl TraceVolume {
    pub fn class(&self, c: PacketClass) -> ClassVolume {
        self.by_class[c.index()]
    }

    pub fn total(&self) -> ClassVolume {
        self.by_class.iter().fold(ClassVolume::default(), |a, b| ClassVolume {
            packets: a.packets + b.packets,
            flits: a.flits + b.flits,
            words: a.words + b.words,
        })
    }
}

/// Exact packet, flit and word counts per class.
pub fn trace_volume(schedule: &Schedule) -> TraceVolume {
    let mut v = TraceVolume::default();
    for round in &schedule.rounds {
        for ev in round.events.iter().filter(|e| e.kind.is_packet()) {
            let c = &mut v.by_class[ev.class.index()];
            c.packets += 1;
            c.flits += ev.flits as u64;
            c.words += ev.words as u64;
            v.ni_injects += 1;
            v.ni_ejects += ev.taps.len() as u64;
            let retires = ev.class == PacketClass::InaChain
                && round.events.iter().any(|o| {
                    o.kind == EventKind::Operand && o.src == ev.dst && o.chain == ev.chain && o.slot.is_some()
                });
            if !retires {
                v.ni_ejects += 1;
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(n: u32, e: u32) -> MeshShape {
        MeshShape::new(n, e).unwrap()
    }

    #[test]
    fn split_cases() {
        let conv4 = LayerShape::new("CONV4", 3, 384, 256, 13);
        let plan = split_weights(&conv4, Precision::default(), PeMemory::default(), mesh(8, 1)).unwrap();
        assert_eq!(plan.parts(), 4);
        let small = LayerShape::new("s", 1, 3, 4, 2);
        let plan = split_weights(&small, Precision::default(), PeMemory::default(), mesh(8, 1)).unwrap();
        assert_eq!(plan.ranges, vec![(0, 3)]);
        // 10 elements of 32 bits, 4 per PE.
        let ten = LayerShape::new("t", 1, 10, 1, 1);
        let q = Precision::default();
        let plan = split_weights(&ten, q, PeMemory::new(128, q).unwrap(), mesh(8, 1)).unwrap();
        assert_eq!(plan.ranges, vec![(0, 4), (4, 8), (8, 10)]);
    }

    #[test]
    fn ws_map_covers_items_once() {
        let layer = LayerShape::new("l", 3, 64, 13, 5);
        let m = WsMap::new(&layer, mesh(4, 2), 2);
        let mut seen: Vec<(u32, u32)> = (0..m.total).map(|i| m.item(i).unwrap()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len() as u64, m.total);
        assert_eq!(m.item(m.total), None);
    }

    #[test]
    fn os_items_cover_once() {
        let layer = LayerShape::new("l", 3, 4, 5, 3);
        let items = os_items(&layer, mesh(2, 2), u64::MAX);
        let mut sorted = items.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 45);
        assert_eq!(items.len(), 45);
    }
}
