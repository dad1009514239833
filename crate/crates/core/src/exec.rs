//! Drives a [`Schedule`] through the cycle-level network.
//!
//! Rounds are separated by a barrier: round `r + 1` is released in the
//! cycle the last packet of round `r` completes. Within a round, a
//! weight-stationary PE starts computing once every stream addressed to it
//! has arrived; an output-stationary PE starts on the first streamed word
//! and consumes the rest as they land. Either hands its result to the router
//! [`OPERAND_LATENCY`] cycles after finishing.

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::dataflow::{EventKind, Schedule, TraceEvent};
use crate::ina::add_words;
use crate::noc::{
    run_until_drained, ChainId, NetEvent, Network, NocConfig, NocError, NodeAddress, PacketId, PacketSpec, SimStats,
    TrafficSource,
};

/// Cycles from a PE finishing to its result being visible to the router.
pub const OPERAND_LATENCY: u64 = 1;
/// Cycles a PE needs to add a received partial sum to its own.
pub const PE_ADD_LATENCY: u64 = 1;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Noc(#[from] NocError),
    #[error("schedule is for a {schedule}x{schedule} mesh but the network is {network}x{network}")]
    MeshMismatch { schedule: u32, network: u16 },
}

#[derive(Debug, Clone, Default)]
pub struct ExecResult {
    pub stats: SimStats,
    /// Cycle at which the last round completed.
    pub cycles: u64,
    /// Completion cycle of each round.
    pub round_ends: Vec<u64>,
    /// Gathered outputs keyed by (filter, pixel).
    pub outputs: BTreeMap<(u32, u32), u32>,
    /// Chain results that ended at a node with no operand of its own.
    pub chain_outputs: Vec<(ChainId, Vec<u32>)>,
    pub event_log: Vec<String>,
}

/// Simulates `schedule` to completion on a fresh mesh built from `cfg`.
pub fn execute(schedule: &Schedule, cfg: &NocConfig, event_log: bool) -> Result<ExecResult, ExecError> {
    if schedule.mesh.n != cfg.n as u32 {
        return Err(ExecError::MeshMismatch { schedule: schedule.mesh.n, network: cfg.n });
    }
    let mut net = Network::build_mesh(cfg.clone())?;
    if event_log {
        net.enable_event_log();
    }
    let mut driver = Driver::new(schedule);
    let stats = run_until_drained(&mut net, &mut driver)?;
    let event_log = if event_log { net.take_event_log() } else { Vec::new() };
    Ok(ExecResult {
        stats,
        cycles: driver.round_ends.last().copied().unwrap_or(0),
        round_ends: driver.round_ends,
        outputs: driver.outputs,
        chain_outputs: driver.chain_outputs,
        event_log,
    })
}

#[derive(Debug, Default, Clone, Copy)]
struct Arrivals {
    count: u32,
    /// Latest head arrival over the streams seen so far.
    first: u64,
    /// Latest tail arrival.
    last: u64,
}

struct Driver<'a> {
    sched: &'a Schedule,
    items: HashMap<(u64, u16, u16), (u32, u32)>,
    next_round: usize,
    /// Cycle the next round may start, once the current one has drained.
    release: Option<u64>,
    round_start: u64,
    outstanding: usize,
    packets: HashMap<PacketId, usize>,
    operands: HashMap<NodeAddress, usize>,
    expected: HashMap<NodeAddress, u32>,
    arrivals: HashMap<NodeAddress, Arrivals>,
    /// Operand ready cycles, for PEs accumulating received partial sums.
    ready: HashMap<NodeAddress, u64>,
    /// Partial sums that arrived before the local operand was computed.
    waiting: HashMap<NodeAddress, (u64, Vec<u32>)>,
    /// Gather packet event per gather row.
    gathers: HashMap<u16, usize>,
    /// Injections refused by a full NI queue.
    retry: VecDeque<(u64, PacketSpec, usize)>,
    now: u64,
    round_ends: Vec<u64>,
    outputs: BTreeMap<(u32, u32), u32>,
    chain_outputs: Vec<(ChainId, Vec<u32>)>,
}

impl<'a> Driver<'a> {
    fn new(sched: &'a Schedule) -> Self {
        Self {
            sched,
            items: sched.gather_items(),
            next_round: 0,
            release: Some(0),
            round_start: 0,
            outstanding: 0,
            packets: HashMap::new(),
            operands: HashMap::new(),
            expected: HashMap::new(),
            arrivals: HashMap::new(),
            ready: HashMap::new(),
            waiting: HashMap::new(),
            gathers: HashMap::new(),
            retry: VecDeque::new(),
            now: 0,
            round_ends: Vec::new(),
            outputs: BTreeMap::new(),
            chain_outputs: Vec::new(),
        }
    }

    fn events(&self) -> &'a [TraceEvent] {
        &self.sched.rounds[self.next_round - 1].events
    }

    fn inject(&mut self, net: &mut Network, created: u64, spec: PacketSpec, ev: usize) -> Result<(), NocError> {
        match net.inject(spec.clone(), created) {
            Ok(id) => {
                self.packets.insert(id, ev);
                Ok(())
            }
            Err(NocError::Backpressure(_)) => {
                self.retry.push_back((created, spec, ev));
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    fn spec(ev: &TraceEvent, payload: Vec<u32>) -> PacketSpec {
        let mut spec = PacketSpec::new(ev.class, ev.src, ev.dst, ev.flits).with_taps(ev.taps.clone());
        if let Some(chain) = ev.chain {
            spec = spec.with_chain(chain);
        }
        spec.with_payload(payload)
    }

    fn gather_id(&self, row: u16) -> Option<ChainId> {
        self.gathers.get(&row).and_then(|&i| self.events()[i].chain)
    }

    fn start_round(&mut self, net: &mut Network, start: u64) -> Result<(), NocError> {
        let events = &self.sched.rounds[self.next_round].events;
        self.next_round += 1;
        self.round_start = start;
        self.packets.clear();
        self.operands.clear();
        self.expected.clear();
        self.arrivals.clear();
        self.ready.clear();
        self.waiting.clear();
        self.gathers.clear();
        self.outstanding = events.iter().filter(|e| e.kind.is_packet()).count();
        for (i, ev) in events.iter().enumerate() {
            match ev.kind {
                EventKind::Operand => {
                    self.operands.insert(ev.src, i);
                }
                EventKind::Gather => {
                    self.gathers.insert(ev.src.y, i);
                }
                EventKind::Weight | EventKind::Input => {
                    for node in ev.taps.iter().chain(std::iter::once(&ev.dst)) {
                        *self.expected.entry(*node).or_default() += 1;
                    }
                }
                EventKind::Psum => {}
            }
        }
        let ina = self.sched.mode.ina();
        for ev in events.iter().filter(|e| e.kind == EventKind::Operand) {
            let gather = self.gather_id(ev.src.y).zip(ev.slot);
            match (ev.chain, ev.hop) {
                (Some(chain), h) if ina && h > 0 => net.register_ina(ev.src, chain, gather)?,
                _ => {
                    if let Some((g, s)) = gather {
                        net.expect_gather(ev.src, g, s)?;
                    }
                }
            }
        }
        for (i, ev) in events.iter().enumerate().filter(|(_, e)| e.kind.is_stream()) {
            self.inject(net, start + ev.cycle, Self::spec(ev, Vec::new()), i)?;
        }
        let idle: Vec<NodeAddress> = events
            .iter()
            .filter(|e| e.kind == EventKind::Operand && !self.expected.contains_key(&e.src))
            .map(|e| e.src)
            .collect();
        for node in idle {
            self.computed(net, node, start)?;
        }
        if self.outstanding == 0 {
            self.finish_round(start);
        }
        Ok(())
    }

    fn finish_round(&mut self, cycle: u64) {
        self.round_ends.push(cycle);
        if self.next_round < self.sched.rounds.len() {
            self.release = Some(cycle);
        }
    }

    /// A stream's tail reached `node`; its head got there at `head`. A MAC
    /// needs one word from every stream, so overlap starts at the latest head.
    fn arrived(&mut self, net: &mut Network, node: NodeAddress, head: u64, cycle: u64) -> Result<(), NocError> {
        let a = self.arrivals.entry(node).or_insert(Arrivals { count: 0, first: head, last: cycle });
        a.count += 1;
        a.first = a.first.max(head);
        a.last = a.last.max(cycle);
        let a = *a;
        if Some(&a.count) != self.expected.get(&node) || !self.operands.contains_key(&node) {
            return Ok(());
        }
        let macs = self.events()[self.operands[&node]].macs as u64;
        let done = if self.sched.mode.output_stationary() { (a.first + macs).max(a.last + 1) } else { a.last + macs };
        self.computed(net, node, done)
    }

    /// The PE at `node` finished computing at `done`.
    fn computed(&mut self, net: &mut Network, node: NodeAddress, done: u64) -> Result<(), NocError> {
        let events = self.events();
        let ev = &events[self.operands[&node]];
        let ready = done + OPERAND_LATENCY;
        match ev.chain {
            Some(chain) if ev.hop == 0 => {
                let (i, psum) = Self::psum_from(events, node, chain).expect("chain initiator has a partial sum packet");
                self.inject(net, ready, Self::spec(psum, ev.payload.clone()), i)?;
            }
            Some(chain) if self.sched.mode.ina() => net.post_operand(node, chain, ev.payload.clone(), ready)?,
            Some(_) => {
                self.ready.insert(node, ready);
                if let Some((at, words)) = self.waiting.remove(&node) {
                    self.accumulate(net, node, at, words)?;
                }
            }
            None => {
                if ev.slot.is_some() {
                    self.contribute(net, node, ev.payload.clone(), ready)?;
                }
            }
        }
        Ok(())
    }

    fn head(net: &Network, packet: PacketId, node: NodeAddress, tail: u64) -> u64 {
        net.packet(packet).heads.iter().find(|(a, _)| *a == node).map_or(tail, |&(_, c)| c)
    }

    fn psum_from(events: &[TraceEvent], node: NodeAddress, chain: ChainId) -> Option<(usize, &TraceEvent)> {
        events.iter().enumerate().find(|(_, e)| e.kind == EventKind::Psum && e.src == node && e.chain == Some(chain))
    }

    /// A partial sum reached a PE that adds its own operand and passes the
    /// result on.
    fn accumulate(&mut self, net: &mut Network, node: NodeAddress, at: u64, words: Vec<u32>) -> Result<(), NocError> {
        let events = self.events();
        let ev = &events[self.operands[&node]];
        let sum = add_words(&words, &ev.payload);
        let t = at.max(self.ready[&node]) + PE_ADD_LATENCY;
        match ev.chain.and_then(|c| Self::psum_from(events, node, c)) {
            Some((i, psum)) => self.inject(net, t, Self::spec(psum, sum), i),
            None if ev.slot.is_some() => self.contribute(net, node, sum, t),
            None => {
                self.chain_outputs.push((ev.chain.unwrap(), sum));
                Ok(())
            }
        }
    }

    fn contribute(
        &mut self,
        net: &mut Network,
        node: NodeAddress,
        words: Vec<u32>,
        ready: u64,
    ) -> Result<(), NocError> {
        let gather = self.gather_id(node.y).expect("gather row has a gather packet");
        net.write_gather(node, gather, words, ready)?;
        self.release_gather(net, node, ready)
    }

    fn release_gather(&mut self, net: &mut Network, node: NodeAddress, at: u64) -> Result<(), NocError> {
        let Some(&i) = self.gathers.get(&node.y) else { return Ok(()) };
        let ev = &self.events()[i];
        if ev.src != node {
            return Ok(());
        }
        let width = self.sched.mesh.n as usize * self.sched.mesh.pes_per_router as usize;
        self.inject(net, at, Self::spec(ev, vec![0; width]), i)
    }

    fn delivered(
        &mut self,
        net: &mut Network,
        ev_index: usize,
        packet: PacketId,
        node: NodeAddress,
        cycle: u64,
    ) -> Result<(), NocError> {
        let ev = &self.events()[ev_index];
        match ev.kind {
            EventKind::Weight | EventKind::Input => {
                let head = Self::head(net, packet, node, cycle);
                self.arrived(net, node, head, cycle)?
            }
            EventKind::Psum => {
                let words = net.packet(packet).spec.payload.clone();
                if self.operands.contains_key(&node) {
                    if self.ready.contains_key(&node) {
                        self.accumulate(net, node, cycle, words)?;
                    } else {
                        self.waiting.insert(node, (cycle, words));
                    }
                } else {
                    self.chain_outputs.push((ev.chain.unwrap(), words));
                }
            }
            EventKind::Gather => {
                let round = self.next_round as u64 - 1;
                let payload = &net.packet(packet).spec.payload;
                for (slot, &w) in payload.iter().enumerate() {
                    if let Some(&item) = self.items.get(&(round, ev.src.y, slot as u16)) {
                        self.outputs.insert(item, w);
                    }
                }
            }
            EventKind::Operand => unreachable!("operands are not packets"),
        }
        Ok(())
    }

    fn packet_done(&mut self, cycle: u64) {
        self.outstanding -= 1;
        if self.outstanding == 0 {
            self.finish_round(cycle);
        }
    }
}

impl TrafficSource for Driver<'_> {
    fn before_cycle(&mut self, net: &mut Network) -> Result<(), NocError> {
        self.now = net.cycle();
        if let Some(at) = self.release {
            if at <= self.now {
                self.release = None;
                self.start_round(net, at.max(self.now))?;
            }
        }
        for _ in 0..self.retry.len() {
            let (created, spec, ev) = self.retry.pop_front().unwrap();
            self.inject(net, created, spec, ev)?;
        }
        Ok(())
    }

    fn on_events(&mut self, events: &[NetEvent], net: &mut Network) -> Result<(), NocError> {
        for e in events {
            match *e {
                NetEvent::Delivered { cycle, packet, node, .. } => {
                    let i = self.packets[&packet];
                    self.delivered(net, i, packet, node, cycle)?;
                    self.packet_done(cycle);
                }
                NetEvent::Tapped { cycle, node, packet, .. } => {
                    self.arrived(net, node, Self::head(net, packet, node, cycle), cycle)?
                }
                NetEvent::Retired { cycle, node, .. } => {
                    self.release_gather(net, node, cycle)?;
                    self.packet_done(cycle);
                }
                NetEvent::Injected { .. } | NetEvent::InaAccumulated { .. } => {}
            }
        }
        Ok(())
    }

    fn is_done(&self) -> bool {
        self.release.is_none()
            && self.outstanding == 0
            && self.retry.is_empty()
            && self.round_ends.len() >= self.sched.rounds.len()
    }

    fn next_wakeup(&self) -> Option<u64> {
        match (self.release, self.retry.is_empty()) {
            (Some(at), true) => Some(at),
            (Some(at), false) => Some(at.min(self.now + 1)),
            (None, false) => Some(self.now + 1),
            (None, true) => None,
        }
    }
}
