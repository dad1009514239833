use std::ops::AddAssign;

use super::{NodeAddress, PacketClass, PacketId};

/// Energy-relevant event tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EventCounts {
    pub buffer_write: u64,
    pub buffer_read: u64,
    pub crossbar: u64,
    /// Switch- and VC-allocation grants.
    pub arbitration: u64,
    pub link: u64,
    /// One per packet entering a router from its NI.
    pub ni_inject: u64,
    /// One per packet (or multicast copy) leaving through an NI.
    pub ni_eject: u64,
    /// One per accumulation performed inside a router.
    pub ina_add: u64,
    /// One per local operand latched into a router's accumulation unit.
    pub operand_latch: u64,
}

impl EventCounts {
    pub const FIELDS: [&'static str; 9] = [
        "buffer_write",
        "buffer_read",
        "crossbar",
        "arbitration",
        "link",
        "ni_inject",
        "ni_eject",
        "ina_add",
        "operand_latch",
    ];

    pub fn as_array(&self) -> [u64; 9] {
        [
            self.buffer_write,
            self.buffer_read,
            self.crossbar,
            self.arbitration,
            self.link,
            self.ni_inject,
            self.ni_eject,
            self.ina_add,
            self.operand_latch,
        ]
    }

    pub fn is_zero(&self) -> bool {
        self.as_array().iter().all(|&c| c == 0)
    }
}

impl AddAssign for EventCounts {
    fn add_assign(&mut self, o: Self) {
        self.buffer_write += o.buffer_write;
        self.buffer_read += o.buffer_read;
        self.crossbar += o.crossbar;
        self.arbitration += o.arbitration;
        self.link += o.link;
        self.ni_inject += o.ni_inject;
        self.ni_eject += o.ni_eject;
        self.ina_add += o.ina_add;
        self.operand_latch += o.operand_latch;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatencyRecord {
    pub packet: PacketId,
    pub class: PacketClass,
    pub src: NodeAddress,
    pub dst: NodeAddress,
    pub flits: u16,
    pub inject_cycle: u64,
    pub deliver_cycle: u64,
}

impl LatencyRecord {
    pub fn latency(&self) -> u64 {
        self.deliver_cycle - self.inject_cycle
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SimStats {
    pub total: EventCounts,
    pub by_class: [EventCounts; 4],
    pub per_router: Vec<EventCounts>,
    pub latencies: Vec<LatencyRecord>,
    pub total_cycles: u64,
    pub packets_injected: u64,
    pub packets_delivered: u64,
    pub flits_created: u64,
    pub flits_retired: u64,
    pub max_buffer_occupancy: u16,
}

impl SimStats {
    pub fn new(routers: usize) -> Self {
        Self { per_router: vec![EventCounts::default(); routers], ..Self::default() }
    }

    pub(crate) fn bump(&mut self, router: usize, class: PacketClass, f: impl Fn(&mut EventCounts)) {
        f(&mut self.total);
        f(&mut self.by_class[class.index()]);
        f(&mut self.per_router[router]);
    }

    pub fn class(&self, class: PacketClass) -> &EventCounts {
        &self.by_class[class.index()]
    }

    pub fn mean_latency(&self) -> f64 {
        if self.latencies.is_empty() {
            return 0.0;
        }
        self.latencies.iter().map(|r| r.latency() as f64).sum::<f64>() / self.latencies.len() as f64
    }

    pub fn max_latency(&self) -> u64 {
        self.latencies.iter().map(LatencyRecord::latency).max().unwrap_or(0)
    }
}
