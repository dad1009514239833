use std::collections::VecDeque;

use super::router::{BufFlit, Front, GatherContribution, InaExpect, Ni, Router};
use super::stats::{LatencyRecord, SimStats};
use super::{
    route_compute, ChainId, Flit, FlitKind, NocConfig, NocError, NodeAddress, Packet, PacketClass, PacketId,
    PacketSpec, Port,
};
use crate::ina::{self, InaAction, InaInputs, InaPhase, Operand, PendingOperand};

/// Observable outcomes of one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetEvent {
    /// Head flit entered the source router.
    Injected {
        cycle: u64,
        packet: PacketId,
        node: NodeAddress,
        vc: u8,
    },
    /// Tail left the destination NI.
    Delivered {
        cycle: u64,
        packet: PacketId,
        node: NodeAddress,
        vc: u8,
    },
    /// A multicast copy left an intermediate router's NI.
    Tapped {
        cycle: u64,
        packet: PacketId,
        node: NodeAddress,
        vc: u8,
    },
    /// A chain packet ended inside its last router, its result parked in
    /// the router's gather store instead of going through the NI.
    Retired {
        cycle: u64,
        packet: PacketId,
        node: NodeAddress,
        vc: u8,
    },
    InaAccumulated {
        cycle: u64,
        node: NodeAddress,
        chain: ChainId,
        words: Vec<u32>,
    },
}

impl NetEvent {
    pub fn cycle(&self) -> u64 {
        match *self {
            NetEvent::Injected { cycle, .. }
            | NetEvent::Delivered { cycle, .. }
            | NetEvent::Tapped { cycle, .. }
            | NetEvent::Retired { cycle, .. }
            | NetEvent::InaAccumulated { cycle, .. } => cycle,
        }
    }

    /// `cycle,node,event_kind,packet_id,vc` or `cycle,node,INA_ACC,chain_id,value`.
    pub fn log_line(&self, n: u16) -> String {
        let (cycle, node, kind, id, last) = match self {
            NetEvent::Injected { cycle, packet, node, vc } => (cycle, node, "INJECT", *packet as u64, vc.to_string()),
            NetEvent::Delivered { cycle, packet, node, vc } => (cycle, node, "EJECT", *packet as u64, vc.to_string()),
            NetEvent::Tapped { cycle, packet, node, vc } => (cycle, node, "TAP", *packet as u64, vc.to_string()),
            NetEvent::Retired { cycle, packet, node, vc } => (cycle, node, "RETIRE", *packet as u64, vc.to_string()),
            NetEvent::InaAccumulated { cycle, node, chain, words } => {
                let value = words.iter().map(u32::to_string).collect::<Vec<_>>().join(";");
                (cycle, node, "INA_ACC", chain.0, value)
            }
        };
        format!("{cycle},{},{kind},{id},{last}", node.index(n))
    }
}

#[derive(Debug, Clone)]
enum Pending {
    Arrive { router: u32, port: u8, flit: Flit },
    Credit { router: u32, port: u8, vc: u8 },
    Deliver { packet: PacketId, node: u32, vc: u8 },
    Tap { packet: PacketId, node: u32, vc: u8 },
    Retire { packet: PacketId, node: u32, vc: u8 },
}

pub struct Network {
    cfg: NocConfig,
    cycle: u64,
    routers: Vec<Router>,
    nis: Vec<Ni>,
    packets: Vec<Packet>,
    wheel: Vec<Vec<Pending>>,
    wheel_len: usize,
    stats: SimStats,
    in_flight: usize,
    log: Option<Vec<String>>,
}

impl Network {
    /// N x N routers, empty buffers, cycle 0.
    pub fn build_mesh(cfg: NocConfig) -> Result<Self, NocError> {
        cfg.validate()?;
        let n = cfg.n;
        let count = n as usize * n as usize;
        let routers = (0..count)
            .map(|i| Router::new(NodeAddress::from_index(i, n), cfg.vcs as usize, cfg.buffer_depth))
            .collect();
        let horizon = (2 + cfg.link_latency).max(2 + cfg.ni_eject_latency).max(cfg.credit_delay) as usize;
        let wheel = vec![Vec::new(); (horizon + 1).next_power_of_two()];
        Ok(Self {
            nis: vec![Ni::new(cfg.vcs as usize); count],
            stats: SimStats::new(count),
            cfg,
            cycle: 0,
            routers,
            packets: Vec::new(),
            wheel,
            wheel_len: 0,
            in_flight: 0,
            log: None,
        })
    }

    pub fn enable_event_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn take_event_log(&mut self) -> Vec<String> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn config(&self) -> &NocConfig {
        &self.cfg
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn into_stats(self) -> SimStats {
        self.stats
    }

    pub fn packet(&self, id: PacketId) -> &Packet {
        &self.packets[id as usize]
    }

    pub fn router_count(&self) -> usize {
        self.routers.len()
    }

    /// Bidirectional links between neighbouring routers.
    pub fn link_count(&self) -> usize {
        let n = self.cfg.n as usize;
        2 * n * (n - 1)
    }

    /// Unidirectional router-to-router channels (two per link).
    pub fn channel_count(&self) -> usize {
        2 * self.link_count()
    }

    fn node_index(&self, a: NodeAddress) -> Result<usize, NocError> {
        if a.x >= self.cfg.n || a.y >= self.cfg.n {
            return Err(NocError::Packet(format!("node {a} outside {0}x{0} mesh", self.cfg.n)));
        }
        Ok(a.index(self.cfg.n))
    }

    fn class_vc(class: PacketClass) -> usize {
        class.vc_parity() as usize
    }

    /// Queues a packet at its source NI. It may enter the router from
    /// `created + ni_inject_latency`.
    pub fn inject(&mut self, spec: PacketSpec, created: u64) -> Result<PacketId, NocError> {
        let src = self.node_index(spec.src)?;
        self.node_index(spec.dst)?;
        if spec.flits == 0 {
            return Err(NocError::Packet("packet needs at least one flit".into()));
        }
        let capacity = (spec.flits as usize - 1) * self.cfg.words_per_flit() as usize;
        if spec.payload.len() > capacity {
            return Err(NocError::Packet(format!(
                "{} payload words do not fit in {} flits",
                spec.payload.len(),
                spec.flits
            )));
        }
        for &t in &spec.taps {
            self.node_index(t)?;
            if t == spec.dst || !on_xy_path(spec.src, spec.dst, t) {
                return Err(NocError::Packet(format!("tap {t} is not an intermediate node of the route")));
            }
        }
        let ni = &mut self.nis[src];
        let outstanding = ni.queued + ni.current.iter().filter(|c| c.is_some()).count();
        if outstanding >= self.cfg.ni_queue_capacity {
            return Err(NocError::Backpressure(spec.src));
        }
        let created = created.max(self.cycle);
        let id = self.packets.len() as PacketId;
        let vc = Self::class_vc(spec.class);
        ni.queues[vc].insert((created + self.cfg.ni_inject_latency as u64, id));
        ni.queued += 1;
        self.stats.packets_injected += 1;
        self.stats.flits_created += spec.flits as u64;
        let filled = if spec.class == PacketClass::Gather { vec![false; spec.payload.len()] } else { Vec::new() };
        self.packets.push(Packet {
            id,
            spec,
            created_cycle: created,
            inject_cycle: None,
            deliver_cycle: None,
            filled,
            heads: Vec::new(),
        });
        Ok(id)
    }

    /// Tells `node` to accumulate into chain packets with this id.
    /// `gather` names the gather packet and slot the result retires into
    /// when `node` is the chain's destination.
    pub fn register_ina(
        &mut self,
        node: NodeAddress,
        chain: ChainId,
        gather: Option<(ChainId, u16)>,
    ) -> Result<(), NocError> {
        let i = self.node_index(node)?;
        if let Some((g, slot)) = gather {
            self.expect_gather(node, g, slot)?;
        }
        self.routers[i].ina_expect.insert(chain, InaExpect { gather, claimed: false });
        Ok(())
    }

    /// Makes the local PE's operand for `chain` available from `ready_at`.
    pub fn post_operand(
        &mut self,
        node: NodeAddress,
        chain: ChainId,
        words: Vec<u32>,
        ready_at: u64,
    ) -> Result<(), NocError> {
        let i = self.node_index(node)?;
        let cycle = self.cycle;
        self.routers[i].pending.insert(PendingOperand { chain, words, ready_at }).map_err(|e| NocError::Protocol {
            cycle,
            node,
            detail: e.to_string(),
        })
    }

    /// Declares that gather packet `gather` must pick up words from `node`
    /// starting at `slot`; the packet stalls here until they are written.
    pub fn expect_gather(&mut self, node: NodeAddress, gather: ChainId, slot: u16) -> Result<(), NocError> {
        let i = self.node_index(node)?;
        self.routers[i].gather.entry(gather).or_insert(GatherContribution { slot, words: None, ready_at: 0 });
        Ok(())
    }

    pub fn write_gather(
        &mut self,
        node: NodeAddress,
        gather: ChainId,
        words: Vec<u32>,
        ready_at: u64,
    ) -> Result<(), NocError> {
        let i = self.node_index(node)?;
        match self.routers[i].gather.get_mut(&gather) {
            Some(c) if c.words.is_none() => {
                c.words = Some(words);
                c.ready_at = ready_at;
                Ok(())
            }
            Some(_) => Err(NocError::GatherSlot { node, detail: format!("gather {gather} written twice") }),
            None => Err(NocError::GatherSlot { node, detail: format!("gather {gather} not expected here") }),
        }
    }

    /// True when no flit, credit, NI packet or accumulation is outstanding.
    pub fn is_quiescent(&self) -> bool {
        self.next_activity().is_none()
    }

    /// Earliest cycle at which the network has something to do on its own.
    pub fn next_activity(&self) -> Option<u64> {
        if self.routers.iter().any(Router::needs_attention) {
            return Some(self.cycle);
        }
        let mut best: Option<u64> = None;
        if self.wheel_len > 0 {
            let w = self.wheel.len() as u64;
            best = (0..w).map(|k| self.cycle + k).find(|&c| !self.wheel[(c % w) as usize].is_empty());
        }
        for ni in self.nis.iter().filter(|ni| ni.busy()) {
            let t = if ni.current.iter().any(Option::is_some) {
                self.cycle
            } else {
                ni.queues.iter().filter_map(|q| q.first().map(|e| e.0)).min().unwrap_or(u64::MAX)
            };
            best = Some(best.map_or(t, |b| b.min(t)));
        }
        best.map(|b| b.max(self.cycle))
    }

    /// Skips idle cycles. Only legal when nothing is due before `cycle`.
    pub fn advance_to(&mut self, cycle: u64) {
        debug_assert!(self.next_activity().is_none_or(|t| t >= cycle));
        self.cycle = self.cycle.max(cycle);
    }

    /// Packets accepted but not yet delivered.
    pub fn outstanding_packets(&self) -> u64 {
        self.stats.packets_injected - self.stats.packets_delivered
    }

    fn schedule(&mut self, at: u64, p: Pending) {
        debug_assert!(at > self.cycle && at - self.cycle < self.wheel.len() as u64);
        let w = self.wheel.len() as u64;
        self.wheel[(at % w) as usize].push(p);
        self.wheel_len += 1;
    }

    /// Advances exactly one cycle.
    pub fn step(&mut self) -> Result<Vec<NetEvent>, NocError> {
        let c = self.cycle;
        let mut events = Vec::new();
        self.drain_wheel(c, &mut events);
        self.ni_inject(c, &mut events);
        for r in 0..self.routers.len() {
            if !self.routers[r].needs_attention() {
                continue;
            }
            self.route_compute_stage(r, c)?;
            if self.cfg.ina_enabled {
                self.ina_stage(r, c, &mut events);
            }
            self.vc_allocate(r, c);
            self.switch_allocate(r, c)?;
        }
        if c.is_multiple_of(1024) {
            self.check_livelock(c)?;
        }
        if let Some(log) = self.log.as_mut() {
            log.extend(events.iter().map(|e| e.log_line(self.cfg.n)));
        }
        self.cycle += 1;
        Ok(events)
    }

    fn drain_wheel(&mut self, c: u64, events: &mut Vec<NetEvent>) {
        let w = self.wheel.len() as u64;
        let due = std::mem::take(&mut self.wheel[(c % w) as usize]);
        self.wheel_len -= due.len();
        let n = self.cfg.n;
        for p in due {
            match p {
                Pending::Credit { router, port, vc } => {
                    self.routers[router as usize].credits[port as usize][vc as usize] += 1;
                }
                Pending::Arrive { router, port, flit } => {
                    let class = self.packets[flit.packet as usize].spec.class;
                    let depth = self.cfg.buffer_depth;
                    let r = &mut self.routers[router as usize];
                    let buf = &mut r.inputs[port as usize][flit.vc as usize].buf;
                    buf.push_back(BufFlit { flit, arrival: c });
                    let occ = buf.len() as u16;
                    assert!(occ <= depth, "credit protocol violated at {}", r.addr);
                    r.occupancy += 1;
                    self.stats.max_buffer_occupancy = self.stats.max_buffer_occupancy.max(occ);
                    self.stats.bump(router as usize, class, |e| e.buffer_write += 1);
                }
                Pending::Deliver { packet, node, vc } | Pending::Retire { packet, node, vc } => {
                    let retire = matches!(p, Pending::Retire { .. });
                    let pk = &mut self.packets[packet as usize];
                    pk.deliver_cycle = Some(c);
                    let inject = pk.inject_cycle.expect("delivered packet was injected");
                    self.stats.latencies.push(LatencyRecord {
                        packet,
                        class: pk.spec.class,
                        src: pk.spec.src,
                        dst: pk.spec.dst,
                        flits: pk.spec.flits,
                        inject_cycle: inject,
                        deliver_cycle: c,
                    });
                    self.stats.packets_delivered += 1;
                    self.stats.flits_retired += pk.spec.flits as u64;
                    self.stats.total_cycles = self.stats.total_cycles.max(c);
                    self.in_flight -= 1;
                    let node = NodeAddress::from_index(node as usize, n);
                    events.push(if retire {
                        NetEvent::Retired { cycle: c, packet, node, vc }
                    } else {
                        NetEvent::Delivered { cycle: c, packet, node, vc }
                    });
                }
                Pending::Tap { packet, node, vc } => {
                    let node = NodeAddress::from_index(node as usize, n);
                    events.push(NetEvent::Tapped { cycle: c, packet, node, vc });
                }
            }
        }
    }

    fn ni_inject(&mut self, c: u64, events: &mut Vec<NetEvent>) {
        let vcs = self.cfg.vcs as usize;
        let depth = self.cfg.buffer_depth as usize;
        let local = Port::Local.index();
        for node in 0..self.nis.len() {
            if !self.nis[node].busy() {
                continue;
            }
            let mut sent = None;
            for k in 0..vcs {
                let v = (self.nis[node].rr + k) % vcs;
                if self.routers[node].inputs[local][v].buf.len() >= depth {
                    continue;
                }
                let ni = &mut self.nis[node];
                let next = match ni.current[v] {
                    Some(cur) => Some(cur),
                    None => match ni.queues[v].first().copied() {
                        Some((eligible, pid)) if eligible <= c => {
                            ni.queues[v].pop_first();
                            ni.queued -= 1;
                            Some((pid, 0))
                        }
                        _ => None,
                    },
                };
                if let Some((pid, seq)) = next {
                    sent = Some((v, pid, seq));
                    break;
                }
            }
            let Some((v, pid, seq)) = sent else { continue };
            let pk = &mut self.packets[pid as usize];
            let len = pk.spec.flits;
            let class = pk.spec.class;
            let kind = FlitKind::for_position(seq, len);
            if kind.is_head() {
                pk.inject_cycle = Some(c);
                self.in_flight += 1;
                self.stats.bump(node, class, |e| e.ni_inject += 1);
                events.push(NetEvent::Injected {
                    cycle: c,
                    packet: pid,
                    node: NodeAddress::from_index(node, self.cfg.n),
                    vc: v as u8,
                });
            }
            let flit = Flit { kind, packet: pid, seq, vc: v as u8 };
            let r = &mut self.routers[node];
            r.inputs[local][v].buf.push_back(BufFlit { flit, arrival: c });
            r.occupancy += 1;
            let occ = r.inputs[local][v].buf.len() as u16;
            self.stats.max_buffer_occupancy = self.stats.max_buffer_occupancy.max(occ);
            self.stats.bump(node, class, |e| e.buffer_write += 1);
            let ni = &mut self.nis[node];
            ni.current[v] = if seq + 1 < len { Some((pid, seq + 1)) } else { None };
            ni.rr = (v + 1) % vcs;
        }
    }

    fn route_compute_stage(&mut self, r: usize, c: u64) -> Result<(), NocError> {
        let ina_enabled = self.cfg.ina_enabled;
        let router = &mut self.routers[r];
        for p in 0..5 {
            for v in 0..router.inputs[p].len() {
                let ivc = &mut router.inputs[p][v];
                let Some(bf) = ivc.buf.front() else { continue };
                if ivc.front.rc_done || !bf.flit.kind.is_head() {
                    continue;
                }
                let spec = &self.packets[bf.flit.packet as usize].spec;
                let mut front =
                    Front { rc_done: true, route: Some(route_compute(router.addr, spec.dst)), ..Front::default() };
                if let Some(chain) = spec.chain {
                    match spec.class {
                        PacketClass::InaChain if ina_enabled => {
                            if let Some(exp) = router.ina_expect.get_mut(&chain) {
                                if exp.claimed {
                                    return Err(NocError::Protocol {
                                        cycle: c,
                                        node: router.addr,
                                        detail: format!("second head of chain {chain} before summation completed"),
                                    });
                                }
                                exp.claimed = true;
                                front.ina = Some(exp.gather);
                            }
                        }
                        PacketClass::Gather => front.gather_contrib = router.gather.contains_key(&chain),
                        _ => {}
                    }
                }
                ivc.front = front;
            }
        }
        Ok(())
    }

    fn ina_stage(&mut self, r: usize, c: u64, events: &mut Vec<NetEvent>) {
        let router = &mut self.routers[r];
        let mut head = None;
        let mut local = None;
        match router.ina.phase {
            InaPhase::Idle => {
                let mut best: Option<(u64, usize, usize)> = None;
                for (p, vcs) in router.inputs.iter().enumerate() {
                    for (v, ivc) in vcs.iter().enumerate() {
                        let Some(bf) = ivc.buf.front() else { continue };
                        if bf.flit.kind.is_head() && ivc.front.ina.is_some() {
                            let key = (bf.arrival, p, v);
                            if best.is_none_or(|b| key < b) {
                                best = Some(key);
                            }
                        }
                    }
                }
                if let Some((_, p, v)) = best {
                    let pid = router.inputs[p][v].buf.front().unwrap().flit.packet;
                    let spec = &self.packets[pid as usize].spec;
                    head = Some(Operand { chain: spec.chain.unwrap(), words: spec.payload.clone() });
                    router.ina_slot = Some((p, v));
                }
            }
            InaPhase::AcquireOperand1 => {
                let chain = router.ina.chain().unwrap();
                if let Some(op) = router.pending.get(chain).filter(|op| op.ready_at <= c) {
                    local = Some(Operand { chain, words: op.words.clone() });
                }
            }
            _ => {}
        }
        let inputs =
            InaInputs { head: head.as_ref(), local: local.as_ref(), switch_traversal: router.ina_st == Some(c) };
        let chain = router.ina.chain();
        let (next, action) = ina::ina_step(&router.ina, inputs);
        router.ina = next;
        match action {
            InaAction::LatchLocal => {
                router.pending.remove(chain.unwrap());
                self.stats.bump(r, PacketClass::InaChain, |e| e.operand_latch += 1);
            }
            InaAction::Commit(words) => {
                router.ina_slot = None;
                router.ina_st = None;
                let node = router.addr;
                // One vector add per accumulation, whatever the payload width.
                self.stats.bump(r, PacketClass::InaChain, |e| e.ina_add += 1);
                events.push(NetEvent::InaAccumulated { cycle: c, node, chain: chain.unwrap(), words });
            }
            _ => {}
        }
    }

    fn vc_allocate(&mut self, r: usize, c: u64) {
        let lr = self.cfg.router_latency as u64;
        let router = &mut self.routers[r];
        let mut requests: [Vec<(usize, usize)>; 4] = Default::default();
        for p in 0..5 {
            for v in 0..router.inputs[p].len() {
                let ivc = &mut router.inputs[p][v];
                let Some(bf) = ivc.buf.front() else { continue };
                if !bf.flit.kind.is_head() || !ivc.front.rc_done || ivc.front.out_vc.is_some() {
                    continue;
                }
                if c + 3 < bf.arrival + lr {
                    continue;
                }
                match ivc.front.route.unwrap() {
                    Port::Local => {
                        ivc.front.out_vc = Some(0);
                        ivc.front.va_cycle = c;
                    }
                    o => requests[o.index()].push((p, v)),
                }
            }
        }
        for (o, reqs) in requests.iter_mut().enumerate() {
            if reqs.is_empty() {
                continue;
            }
            let start = router.va_rr[o];
            reqs.sort_by_key(|&(p, v)| ((p + 5 - start) % 5, v));
            for &(p, v) in reqs.iter() {
                let pid = router.inputs[p][v].buf.front().unwrap().flit.packet;
                let class = self.packets[pid as usize].spec.class;
                let parity = class.vc_parity() as usize;
                let free = (0..router.out_busy[o].len()).find(|&w| w % 2 == parity && !router.out_busy[o][w]);
                if let Some(w) = free {
                    router.out_busy[o][w] = true;
                    let f = &mut router.inputs[p][v].front;
                    f.out_vc = Some(w as u8);
                    f.va_cycle = c;
                    router.va_rr[o] = (p + 1) % 5;
                    self.stats.bump(r, class, |e| e.arbitration += 1);
                }
            }
        }
    }

    fn sa_eligible(&self, r: usize, p: usize, v: usize, c: u64) -> Option<Port> {
        let router = &self.routers[r];
        let ivc = &router.inputs[p][v];
        let bf = ivc.buf.front()?;
        let out_vc = ivc.front.out_vc?;
        if ivc.front.va_cycle >= c || c + 2 < bf.arrival + self.cfg.router_latency as u64 {
            return None;
        }
        if bf.flit.kind.is_head() {
            if ivc.front.ina.is_some()
                && !(router.ina.phase == InaPhase::Summation
                    && router.ina_slot == Some((p, v))
                    && router.ina_st.is_none())
            {
                return None;
            }
            if ivc.front.gather_contrib {
                let chain = self.packets[bf.flit.packet as usize].spec.chain?;
                match router.gather.get(&chain) {
                    Some(g) if g.words.is_some() && g.ready_at <= c => {}
                    _ => return None,
                }
            }
        }
        let route = ivc.front.route?;
        if route != Port::Local && router.credits[route.index()][out_vc as usize] == 0 {
            return None;
        }
        Some(route)
    }

    fn switch_allocate(&mut self, r: usize, c: u64) -> Result<(), NocError> {
        let vcs = self.cfg.vcs as usize;
        let mut choice: [Option<(usize, Port)>; 5] = [None; 5];
        for (p, slot) in choice.iter_mut().enumerate() {
            let start = self.routers[r].sa_in_rr[p];
            for k in 0..vcs {
                let v = (start + k) % vcs;
                if let Some(route) = self.sa_eligible(r, p, v, c) {
                    *slot = Some((v, route));
                    break;
                }
            }
        }
        for o in Port::ALL {
            let start = self.routers[r].sa_out_rr[o.index()];
            let winner = (0..5).map(|k| (start + k) % 5).find(|&p| matches!(choice[p], Some((_, route)) if route == o));
            if let Some(p) = winner {
                let v = choice[p].unwrap().0;
                let router = &mut self.routers[r];
                router.sa_out_rr[o.index()] = (p + 1) % 5;
                router.sa_in_rr[p] = (v + 1) % vcs;
                self.traverse(r, p, v, c)?;
            }
        }
        Ok(())
    }

    /// Switch allocation won: dequeue the flit and apply its traversal.
    fn traverse(&mut self, r: usize, p: usize, v: usize, c: u64) -> Result<(), NocError> {
        let n = self.cfg.n;
        let (bf, front) = {
            let router = &mut self.routers[r];
            let ivc = &mut router.inputs[p][v];
            let bf = ivc.buf.pop_front().unwrap();
            router.occupancy -= 1;
            (bf, ivc.front.clone())
        };
        let flit = bf.flit;
        let pid = flit.packet as usize;
        let class = self.packets[pid].spec.class;
        let addr = self.routers[r].addr;
        self.stats.bump(r, class, |e| {
            e.buffer_read += 1;
            e.arbitration += 1;
            e.crossbar += 1;
        });
        if p != Port::Local.index() {
            let up = neighbor(addr, Port::ALL[p], n).index(n);
            let at = c + self.cfg.credit_delay as u64;
            self.schedule(at, Pending::Credit { router: up as u32, port: Port::ALL[p].opposite() as u8, vc: v as u8 });
        }
        let route = front.route.unwrap();
        let out_vc = front.out_vc.unwrap();
        let eject_at = c + 2 + self.cfg.ni_eject_latency as u64;
        if flit.kind.is_head() {
            let pk = &mut self.packets[pid];
            if route == Port::Local || pk.spec.taps.contains(&addr) {
                pk.heads.push((addr, eject_at));
            }
            if front.ina.is_some() {
                let router = &mut self.routers[r];
                let chain = router.ina.chain().unwrap();
                self.packets[pid].spec.payload = router.ina.result.clone().unwrap();
                router.ina_st = Some(c + 1);
                router.ina_expect.remove(&chain);
            }
            if front.gather_contrib {
                let chain = self.packets[pid].spec.chain.unwrap();
                let contrib = self.routers[r].gather.remove(&chain).unwrap();
                let pk = &mut self.packets[pid];
                ina::gather_append(
                    &mut pk.spec.payload,
                    &mut pk.filled,
                    contrib.words.as_deref().unwrap_or(&[]),
                    contrib.slot as usize,
                )
                .map_err(|e| NocError::GatherSlot { node: addr, detail: e.to_string() })?;
            }
        }
        if route != Port::Local {
            if flit.kind.is_tail() && self.packets[pid].spec.taps.contains(&addr) {
                self.stats.bump(r, class, |e| e.ni_eject += 1);
                self.schedule(eject_at, Pending::Tap { packet: flit.packet, node: r as u32, vc: out_vc });
            }
            let router = &mut self.routers[r];
            router.credits[route.index()][out_vc as usize] -= 1;
            if flit.kind.is_tail() {
                router.out_busy[route.index()][out_vc as usize] = false;
            }
            self.stats.bump(r, class, |e| e.link += 1);
            let down = neighbor(addr, route, n).index(n);
            let at = c + 2 + self.cfg.link_latency as u64;
            self.schedule(
                at,
                Pending::Arrive {
                    router: down as u32,
                    port: route.opposite() as u8,
                    flit: Flit { vc: out_vc, ..flit },
                },
            );
        } else if flit.kind.is_tail() {
            match front.ina {
                Some(Some((gather, slot))) => {
                    let words = self.packets[pid].spec.payload.clone();
                    let entry = self.routers[r].gather.entry(gather).or_insert(GatherContribution {
                        slot,
                        words: None,
                        ready_at: 0,
                    });
                    entry.words = Some(words);
                    entry.ready_at = c + 2;
                    self.schedule(c + 2, Pending::Retire { packet: flit.packet, node: r as u32, vc: flit.vc });
                }
                _ => {
                    self.stats.bump(r, class, |e| e.ni_eject += 1);
                    self.schedule(eject_at, Pending::Deliver { packet: flit.packet, node: r as u32, vc: flit.vc });
                }
            }
        }
        if flit.kind.is_tail() {
            self.routers[r].inputs[p][v].front = Front::default();
        }
        Ok(())
    }

    fn check_livelock(&self, c: u64) -> Result<(), NocError> {
        let bound = self.cfg.livelock_bound;
        for router in self.routers.iter().filter(|r| r.occupancy > 0) {
            for ivc in router.inputs.iter().flatten() {
                if let Some(bf) = ivc.buf.front() {
                    let inject = self.packets[bf.flit.packet as usize].inject_cycle.unwrap_or(c);
                    if c.saturating_sub(inject) > bound {
                        return Err(NocError::Livelock { cycle: c, packet: bf.flit.packet, bound });
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-packet flits currently buffered, for invariant checks.
    pub fn buffered_flits(&self) -> u64 {
        self.routers.iter().map(|r| r.occupancy as u64).sum()
    }

    /// Largest occupancy of any input VC right now.
    pub fn max_occupancy_now(&self) -> usize {
        self.routers.iter().flat_map(|r| r.inputs.iter().flatten()).map(|ivc| ivc.buf.len()).max().unwrap_or(0)
    }

    /// Diagnostic summary of what is still held inside routers.
    pub fn describe_pending(&self) -> String {
        let mut parts = Vec::new();
        for r in &self.routers {
            if r.occupancy > 0 {
                parts.push(format!("{} holds {} flits", r.addr, r.occupancy));
            }
            if !r.pending.is_empty() {
                parts.push(format!("{} holds {} unused operands", r.addr, r.pending.len()));
            }
            for (chain, g) in &r.gather {
                if g.words.is_none() {
                    parts.push(format!("{} awaits gather words for {chain}", r.addr));
                }
            }
        }
        if parts.is_empty() {
            "no buffered state".into()
        } else {
            parts.truncate(8);
            parts.join("; ")
        }
    }
}

fn neighbor(a: NodeAddress, p: Port, _n: u16) -> NodeAddress {
    match p {
        Port::North => NodeAddress::new(a.x, a.y + 1),
        Port::South => NodeAddress::new(a.x, a.y - 1),
        Port::East => NodeAddress::new(a.x + 1, a.y),
        Port::West => NodeAddress::new(a.x - 1, a.y),
        Port::Local => a,
    }
}

fn on_xy_path(src: NodeAddress, dst: NodeAddress, t: NodeAddress) -> bool {
    let mut cur = src;
    loop {
        if cur == t {
            return true;
        }
        let p = route_compute(cur, dst);
        if p == Port::Local {
            return false;
        }
        cur = neighbor(cur, p, 0);
    }
}

/// Drives a [`Network`] from the outside: injects packets, reacts to
/// deliveries, and says when it is finished.
pub trait TrafficSource {
    /// Called before every simulated cycle.
    fn before_cycle(&mut self, net: &mut Network) -> Result<(), NocError>;
    fn on_events(&mut self, events: &[NetEvent], net: &mut Network) -> Result<(), NocError>;
    fn is_done(&self) -> bool;
    /// Next cycle at which the source would act without any network event.
    fn next_wakeup(&self) -> Option<u64>;
}

/// Steps until the source is done and the network is empty, skipping idle
/// stretches.
pub fn run_until_drained(net: &mut Network, source: &mut dyn TrafficSource) -> Result<SimStats, NocError> {
    loop {
        source.before_cycle(net)?;
        let net_next = net.next_activity();
        if source.is_done() && net_next.is_none() {
            break;
        }
        let wake = match (net_next, source.next_wakeup()) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => {
                return Err(NocError::Stalled { cycle: net.cycle(), detail: net.describe_pending() });
            }
        };
        if wake > net.cycle() {
            net.advance_to(wake);
            continue;
        }
        let events = net.step()?;
        source.on_events(&events, net)?;
    }
    Ok(net.stats().clone())
}

/// A fixed list of `(cycle, packet)` injections.
#[derive(Debug, Clone, Default)]
pub struct TimedTraffic {
    queue: VecDeque<(u64, PacketSpec)>,
    pub injected: Vec<PacketId>,
}

impl TimedTraffic {
    pub fn new(mut items: Vec<(u64, PacketSpec)>) -> Self {
        items.sort_by_key(|(c, _)| *c);
        Self { queue: items.into(), injected: Vec::new() }
    }
}

impl TrafficSource for TimedTraffic {
    fn before_cycle(&mut self, net: &mut Network) -> Result<(), NocError> {
        while let Some((at, _)) = self.queue.front() {
            if *at > net.cycle() {
                break;
            }
            let (at, spec) = self.queue.pop_front().unwrap();
            match net.inject(spec.clone(), at) {
                Ok(id) => self.injected.push(id),
                Err(NocError::Backpressure(_)) => {
                    self.queue.push_front((net.cycle() + 1, spec));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn on_events(&mut self, _: &[NetEvent], _: &mut Network) -> Result<(), NocError> {
        Ok(())
    }

    fn is_done(&self) -> bool {
        self.queue.is_empty()
    }

    fn next_wakeup(&self) -> Option<u64> {
        self.queue.front().map(|(c, _)| *c)
    }
}
