//! Wormhole-switched 2D mesh: addresses, packets, configuration and routing.
//!
//! The cycle loop lives in [`network`]; per-router state in [`router`];
//! counters in [`stats`].

mod network;
mod router;
mod stats;

pub use network::{run_until_drained, NetEvent, Network, TimedTraffic, TrafficSource};
pub use stats::{EventCounts, LatencyRecord, SimStats};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeAddress {
    pub x: u16,
    pub y: u16,
}

impl NodeAddress {
    pub const fn new(x: u16, y: u16) -> Self {
        Self { x, y }
    }

    pub fn index(self, n: u16) -> usize {
        self.y as usize * n as usize + self.x as usize
    }

    pub fn from_index(i: usize, n: u16) -> Self {
        Self { x: (i % n as usize) as u16, y: (i / n as usize) as u16 }
    }

    /// Manhattan distance, which is also the XY hop count.
    pub fn hops_to(self, other: NodeAddress) -> u32 {
        self.x.abs_diff(other.x) as u32 + self.y.abs_diff(other.y) as u32
    }
}

impl fmt::Display for NodeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Router ports. North is +y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
    Local = 4,
}

impl Port {
    pub const ALL: [Port; 5] = [Port::North, Port::East, Port::South, Port::West, Port::Local];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Port {
        match self {
            Port::North => Port::South,
            Port::South => Port::North,
            Port::East => Port::West,
            Port::West => Port::East,
            Port::Local => Port::Local,
        }
    }
}

/// XY dimension-order routing.
pub fn route_compute(current: NodeAddress, dst: NodeAddress) -> Port {
    if dst.x > current.x {
        Port::East
    } else if dst.x < current.x {
        Port::West
    } else if dst.y > current.y {
        Port::North
    } else if dst.y < current.y {
        Port::South
    } else {
        Port::Local
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketClass {
    Unicast,
    Stream,
    InaChain,
    Gather,
}

impl PacketClass {
    pub const ALL: [PacketClass; 4] =
        [PacketClass::Unicast, PacketClass::Stream, PacketClass::InaChain, PacketClass::Gather];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PacketClass::Unicast => "unicast",
            PacketClass::Stream => "stream",
            PacketClass::InaChain => "ina_chain",
            PacketClass::Gather => "gather",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Distribution traffic rides the even VCs, collection traffic the odd ones.
    pub fn vc_parity(self) -> u8 {
        match self {
            PacketClass::Unicast | PacketClass::Stream => 0,
            PacketClass::InaChain | PacketClass::Gather => 1,
        }
    }
}

impl fmt::Display for PacketClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Correlates chain and gather packets with the operands routers hold for
/// them. Packs (layer 8b, filter 16b, pixel 20b, round 20b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainId(pub u64);

impl ChainId {
    const GATHER_FILTER: u64 = 0xFFFF;

    pub fn new(layer: u8, filter: u32, pixel: u32, round: u64) -> Self {
        let filter = filter as u64 & 0xFFFF;
        let pixel = pixel as u64 & 0xF_FFFF;
        let round = round & 0xF_FFFF;
        Self(((layer as u64) << 56) | (filter << 40) | (pixel << 20) | round)
    }

    /// Identity of the gather packet collecting `row` in `round`.
    pub fn gather(layer: u8, row: u16, round: u64) -> Self {
        Self::new(layer, Self::GATHER_FILTER as u32, row as u32, round)
    }

    pub fn layer(self) -> u8 {
        (self.0 >> 56) as u8
    }

    pub fn filter(self) -> u32 {
        ((self.0 >> 40) & 0xFFFF) as u32
    }

    pub fn pixel(self) -> u32 {
        ((self.0 >> 20) & 0xF_FFFF) as u32
    }

    pub fn round(self) -> u64 {
        self.0 & 0xF_FFFF
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlitKind {
    Head,
    Body,
    Tail,
    HeadTail,
}

impl FlitKind {
    pub fn for_position(seq: u16, len: u16) -> Self {
        match (seq == 0, seq + 1 == len) {
            (true, true) => FlitKind::HeadTail,
            (true, false) => FlitKind::Head,
            (false, true) => FlitKind::Tail,
            (false, false) => FlitKind::Body,
        }
    }

    pub fn is_head(self) -> bool {
        matches!(self, FlitKind::Head | FlitKind::HeadTail)
    }

    pub fn is_tail(self) -> bool {
        matches!(self, FlitKind::Tail | FlitKind::HeadTail)
    }
}

pub type PacketId = u32;

/// A flit references its packet; payload words live in the packet table and
/// are sliced per flit on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flit {
    pub kind: FlitKind,
    pub packet: PacketId,
    pub seq: u16,
    pub vc: u8,
}

/// `1 + ceil(words * 32 / flit_width)`: one header flit plus payload flits.
pub fn flit_count(payload_words: u32, flit_width: u32) -> u16 {
    let bits = payload_words as u64 * 32;
    (1 + bits.div_ceil(flit_width as u64)) as u16
}

/// What a caller asks the network to carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketSpec {
    pub class: PacketClass,
    pub src: NodeAddress,
    pub dst: NodeAddress,
    pub flits: u16,
    pub chain: Option<ChainId>,
    pub payload: Vec<u32>,
    /// Routers on the path (other than `dst`) whose local port receives a copy.
    pub taps: Vec<NodeAddress>,
}

impl PacketSpec {
    pub fn new(class: PacketClass, src: NodeAddress, dst: NodeAddress, flits: u16) -> Self {
        Self { class, src, dst, flits, chain: None, payload: Vec::new(), taps: Vec::new() }
    }

    pub fn with_chain(mut self, chain: ChainId) -> Self {
        self.chain = Some(chain);
        self
    }

    pub fn with_payload(mut self, payload: Vec<u32>) -> Self {
        self.payload = payload;
        self
    }

    pub fn with_taps(mut self, taps: Vec<NodeAddress>) -> Self {
        self.taps = taps;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: PacketId,
    pub spec: PacketSpec,
    pub created_cycle: u64,
    pub inject_cycle: Option<u64>,
    pub deliver_cycle: Option<u64>,
    /// Gather slots already written, one flag per payload word.
    pub filled: Vec<bool>,
    /// Cycle the head flit reached each tap or destination NI.
    pub heads: Vec<(NodeAddress, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NocConfig {
    pub n: u16,
    pub vcs: u8,
    pub buffer_depth: u16,
    /// Cycles an uncontended flit spends in a router (BW/RC, VA, SA, ST).
    pub router_latency: u32,
    pub link_latency: u32,
    pub flit_width: u32,
    pub ni_inject_latency: u32,
    pub ni_eject_latency: u32,
    /// Packets a node's NI will queue before signalling backpressure.
    pub ni_queue_capacity: usize,
    pub credit_delay: u32,
    /// Cycles a packet may stay in flight before the run is declared stuck.
    pub livelock_bound: u64,
    pub ina_enabled: bool,
}

impl Default for NocConfig {
    fn default() -> Self {
        Self {
            n: 8,
            vcs: 2,
            buffer_depth: 4,
            router_latency: 4,
            link_latency: 1,
            flit_width: 128,
            ni_inject_latency: 2,
            ni_eject_latency: 2,
            ni_queue_capacity: 1024,
            credit_delay: 1,
            livelock_bound: 1_000_000,
            ina_enabled: true,
        }
    }
}

impl NocConfig {
    pub fn with_n(mut self, n: u16) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<(), NocError> {
        let bad = |msg: &str| Err(NocError::Config(msg.to_string()));
        if self.n < 2 {
            return bad("mesh side must be >= 2");
        }
        if self.buffer_depth == 0 {
            return bad("buffer depth must be >= 1");
        }
        if self.vcs < 2 {
            return bad("at least 2 virtual channels are needed (one per traffic group)");
        }
        if self.router_latency < 3 {
            return bad("router latency must be >= 3 cycles");
        }
        if self.flit_width < 32 || !self.flit_width.is_multiple_of(32) {
            return bad("flit width must be a positive multiple of 32 bits");
        }
        if self.credit_delay == 0 {
            return bad("credit delay must be >= 1");
        }
        if self.ni_queue_capacity == 0 {
            return bad("NI queue capacity must be >= 1");
        }
        Ok(())
    }

    /// Zero-load latency from head injection to delivery.
    pub fn zero_load_latency(&self, hops: u32, flits: u16) -> u64 {
        hops as u64 * (self.router_latency + self.link_latency) as u64
            + self.router_latency as u64
            + (flits as u64 - 1)
            + self.ni_eject_latency as u64
    }

    pub fn words_per_flit(&self) -> u32 {
        self.flit_width / 32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NocError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("invalid packet: {0}")]
    Packet(String),
    #[error("NI queue at {0} is full")]
    Backpressure(NodeAddress),
    #[error("cycle {cycle}: packet {packet} in flight for more than {bound} cycles (livelock or missing operand)")]
    Livelock { cycle: u64, packet: PacketId, bound: u64 },
    #[error("cycle {cycle}: traffic pending but nothing can make progress ({detail})")]
    Stalled { cycle: u64, detail: String },
    #[error("cycle {cycle}: INA protocol violation at {node}: {detail}")]
    Protocol { cycle: u64, node: NodeAddress, detail: String },
    #[error("gather slot error at {node}: {detail}")]
    GatherSlot { node: NodeAddress, detail: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xy_routing() {
        let a = NodeAddress::new;
        assert_eq!(route_compute(a(1, 1), a(3, 1)), Port::East);
        assert_eq!(route_compute(a(3, 1), a(3, 4)), Port::North);
        assert_eq!(route_compute(a(2, 2), a(2, 2)), Port::Local);
        assert_eq!(route_compute(a(3, 4), a(1, 0)), Port::West);
        assert_eq!(route_compute(a(1, 4), a(1, 0)), Port::South);
    }

    #[test]
    fn flit_counts() {
        let gather: Vec<u16> = [1u32, 2, 4, 8].iter().map(|e| flit_count(8 * e, 128)).collect();
        assert_eq!(gather, vec![3, 5, 9, 17]);
        let unicast: Vec<u16> = [1u32, 2, 4, 8].iter().map(|e| flit_count(*e, 128)).collect();
        assert_eq!(unicast, vec![2, 2, 2, 3]);
        assert_eq!(flit_count(0, 128), 1);
    }

    #[test]
    fn chain_id_fields_round_trip() {
        let id = ChainId::new(3, 511, 50_175, 12_543);
        assert_eq!((id.layer(), id.filter(), id.pixel(), id.round()), (3, 511, 50_175, 12_543));
        let g = ChainId::gather(3, 7, 9);
        assert_eq!(g.pixel(), 7);
        assert_ne!(g, ChainId::new(3, 0, 7, 9));
    }

    #[test]
    fn flit_kinds() {
        assert_eq!(FlitKind::for_position(0, 1), FlitKind::HeadTail);
        assert_eq!(FlitKind::for_position(0, 3), FlitKind::Head);
        assert_eq!(FlitKind::for_position(1, 3), FlitKind::Body);
        assert_eq!(FlitKind::for_position(2, 3), FlitKind::Tail);
    }

    #[test]
    fn config_validation() {
        assert!(NocConfig::default().validate().is_ok());
        assert!(NocConfig::default().with_n(1).validate().is_err());
        let cfg = NocConfig { buffer_depth: 0, ..NocConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
