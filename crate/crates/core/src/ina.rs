//! In-router accumulation: the operand-matching FSM, the adder and the
//! gather-slot writer. The router in [`crate::noc`] drives these once per
//! cycle; everything here is pure so it can be model-checked.

use std::collections::HashMap;

use thiserror::Error;

use crate::noc::ChainId;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Operand {
    pub chain: ChainId,
    pub words: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InaPhase {
    #[default]
    Idle,
    AcquireOperand1,
    AcquireOperand2,
    Summation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct InaUnitState {
    pub phase: InaPhase,
    /// Partial sum carried by the packet.
    pub operand1: Option<Operand>,
    /// Partial sum produced by the local PE.
    pub operand2: Option<Operand>,
    pub result: Option<Vec<u32>>,
}

impl InaUnitState {
    /// Slot contents agree with the phase.
    pub fn is_consistent(&self) -> bool {
        match self.phase {
            InaPhase::Idle => self.operand1.is_none() && self.operand2.is_none() && self.result.is_none(),
            InaPhase::AcquireOperand1 => self.operand1.is_some() && self.operand2.is_none() && self.result.is_none(),
            InaPhase::AcquireOperand2 | InaPhase::Summation => {
                let same = match (&self.operand1, &self.operand2) {
                    (Some(a), Some(b)) => a.chain == b.chain,
                    _ => false,
                };
                same && (self.phase == InaPhase::AcquireOperand2) == self.result.is_none()
            }
        }
    }

    pub fn chain(&self) -> Option<ChainId> {
        self.operand1.as_ref().map(|o| o.chain)
    }
}

/// What the unit observes in one cycle.
#[derive(Debug, Clone, Copy, Default)]
pub struct InaInputs<'a> {
    /// A chain head waiting at route compute that this router must accumulate.
    pub head: Option<&'a Operand>,
    /// The local PE's operand, if one is ready.
    pub local: Option<&'a Operand>,
    /// The head of the chain being summed is in switch traversal.
    pub switch_traversal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InaAction {
    None,
    LatchNetwork,
    LatchLocal,
    Sum,
    /// The summed words to write into the packet.
    Commit(Vec<u32>),
}

/// One FSM transition. At most one phase change per call.
pub fn ina_step(state: &InaUnitState, inputs: InaInputs<'_>) -> (InaUnitState, InaAction) {
    let mut next = state.clone();
    let action = match state.phase {
        InaPhase::Idle => match inputs.head {
            Some(head) => {
                next.phase = InaPhase::AcquireOperand1;
                next.operand1 = Some(head.clone());
                InaAction::LatchNetwork
            }
            None => InaAction::None,
        },
        InaPhase::AcquireOperand1 => match inputs.local {
            Some(local) if Some(local.chain) == state.chain() => {
                next.phase = InaPhase::AcquireOperand2;
                next.operand2 = Some(local.clone());
                InaAction::LatchLocal
            }
            _ => InaAction::None,
        },
        InaPhase::AcquireOperand2 => {
            let a = state.operand1.as_ref().expect("operand1 latched");
            let b = state.operand2.as_ref().expect("operand2 latched");
            next.phase = InaPhase::Summation;
            next.result = Some(add_words(&a.words, &b.words));
            InaAction::Sum
        }
        InaPhase::Summation if inputs.switch_traversal => {
            let result = state.result.clone().expect("result computed");
            next = InaUnitState::default();
            InaAction::Commit(result)
        }
        InaPhase::Summation => InaAction::None,
    };
    (next, action)
}

/// Two's-complement 32-bit wrapping add.
pub fn ina_accumulate(operand1: u32, operand2: u32) -> u32 {
    operand1.wrapping_add(operand2)
}

/// Element-wise [`ina_accumulate`]; the shorter side is zero-extended.
pub fn add_words(a: &[u32], b: &[u32]) -> Vec<u32> {
    (0..a.len().max(b.len()))
        .map(|i| ina_accumulate(a.get(i).copied().unwrap_or(0), b.get(i).copied().unwrap_or(0)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingOperand {
    pub chain: ChainId,
    pub words: Vec<u32>,
    /// First cycle the unit may latch it.
    pub ready_at: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InaError {
    #[error("operand for chain {0} is already pending")]
    DuplicateOperand(ChainId),
    #[error("gather slot {slot}+{len} exceeds capacity {capacity}")]
    SlotOverflow { slot: usize, len: usize, capacity: usize },
    #[error("gather slot {0} already filled")]
    SlotFilled(usize),
}

/// Operands the local PE has produced for chains not yet seen.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PendingStore {
    entries: HashMap<ChainId, PendingOperand>,
}

impl PendingStore {
    pub fn insert(&mut self, op: PendingOperand) -> Result<(), InaError> {
        if self.entries.contains_key(&op.chain) {
            return Err(InaError::DuplicateOperand(op.chain));
        }
        self.entries.insert(op.chain, op);
        Ok(())
    }

    pub fn get(&self, chain: ChainId) -> Option<&PendingOperand> {
        self.entries.get(&chain)
    }

    pub fn remove(&mut self, chain: ChainId) -> Option<PendingOperand> {
        self.entries.remove(&chain)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// True iff an operand for this chain (which encodes its round) is held locally.
pub fn ina_match(chain: ChainId, pending: &PendingStore) -> bool {
    pending.get(chain).is_some()
}

/// Pre-sized gather payload with one fill flag per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatherPayload {
    pub words: Vec<u32>,
    pub filled: Vec<bool>,
}

impl GatherPayload {
    pub fn new(capacity: usize) -> Self {
        Self { words: vec![0; capacity], filled: vec![false; capacity] }
    }
}

/// Writes `local` into consecutive slots starting at `slot`. Rejects the
/// whole write if any target slot is out of range or already filled.
pub fn gather_append(words: &mut [u32], filled: &mut [bool], local: &[u32], slot: usize) -> Result<(), InaError> {
    let capacity = words.len();
    if slot + local.len() > capacity {
        return Err(InaError::SlotOverflow { slot, len: local.len(), capacity });
    }
    if let Some(i) = (slot..slot + local.len()).find(|&i| filled[i]) {
        return Err(InaError::SlotFilled(i));
    }
    words[slot..slot + local.len()].copy_from_slice(local);
    filled[slot..slot + local.len()].iter_mut().for_each(|f| *f = true);
    Ok(())
}
