use std::collections::{BTreeSet, HashMap, VecDeque};

use super::{ChainId, Flit, NodeAddress, PacketId, Port};
use crate::ina::{InaUnitState, PendingStore};

#[derive(Debug, Clone, Copy)]
pub(crate) struct BufFlit {
    pub flit: Flit,
    /// Cycle the flit was written (buffer write / route compute).
    pub arrival: u64,
}

/// Per-packet state of whatever packet currently heads an input VC.
#[derive(Debug, Clone, Default)]
pub(crate) struct Front {
    pub rc_done: bool,
    pub route: Option<Port>,
    pub out_vc: Option<u8>,
    pub va_cycle: u64,
    /// Set when this router must accumulate into the packet; carries the
    /// gather slot the result retires into, if any.
    pub ina: Option<Option<(ChainId, u16)>>,
    pub gather_contrib: bool,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct InputVc {
    pub buf: VecDeque<BufFlit>,
    pub front: Front,
}

#[derive(Debug, Clone)]
pub(crate) struct InaExpect {
    pub gather: Option<(ChainId, u16)>,
    pub claimed: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct GatherContribution {
    pub slot: u16,
    pub words: Option<Vec<u32>>,
    pub ready_at: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct Router {
    pub addr: NodeAddress,
    /// `[port][vc]`
    pub inputs: Vec<Vec<InputVc>>,
    /// Free downstream slots, `[port][vc]`; the Local row is unused.
    pub credits: Vec<Vec<u16>>,
    pub out_busy: Vec<Vec<bool>>,
    pub va_rr: [usize; 5],
    pub sa_in_rr: [usize; 5],
    pub sa_out_rr: [usize; 5],
    pub occupancy: u32,
    pub ina: InaUnitState,
    /// Input VC whose head the unit is serving.
    pub ina_slot: Option<(usize, usize)>,
    /// Cycle the served head is in switch traversal.
    pub ina_st: Option<u64>,
    pub ina_expect: HashMap<ChainId, InaExpect>,
    pub pending: PendingStore,
    pub gather: HashMap<ChainId, GatherContribution>,
}

impl Router {
    pub fn new(addr: NodeAddress, vcs: usize, depth: u16) -> Self {
        Self {
            addr,
            inputs: vec![vec![InputVc::default(); vcs]; 5],
            credits: vec![vec![depth; vcs]; 5],
            out_busy: vec![vec![false; vcs]; 5],
            va_rr: [0; 5],
            sa_in_rr: [0; 5],
            sa_out_rr: [0; 5],
            occupancy: 0,
            ina: InaUnitState::default(),
            ina_slot: None,
            ina_st: None,
            ina_expect: HashMap::new(),
            pending: PendingStore::default(),
            gather: HashMap::new(),
        }
    }

    pub fn needs_attention(&self) -> bool {
        self.occupancy > 0 || self.ina_slot.is_some()
    }
}

/// Network interface queues of one node, one per VC.
#[derive(Debug, Clone)]
pub(crate) struct Ni {
    /// Waiting packets keyed by (eligible cycle, id).
    pub queues: Vec<BTreeSet<(u64, PacketId)>>,
    /// Packet currently being serialized into the router, and next flit.
    pub current: Vec<Option<(PacketId, u16)>>,
    pub rr: usize,
    pub queued: usize,
}

impl Ni {
    pub fn new(vcs: usize) -> Self {
        Self { queues: vec![BTreeSet::new(); vcs], current: vec![None; vcs], rr: 0, queued: 0 }
    }

    pub fn busy(&self) -> bool {
        self.queued > 0 || self.current.iter().any(Option::is_some)
    }
}
