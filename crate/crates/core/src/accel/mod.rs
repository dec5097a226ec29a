//! Behavioural model of the preemptible accelerator.

pub mod cost;
pub mod scratchpad;
pub mod trace;

use std::collections::VecDeque;

use crate::task::SystemParams;
use crate::Cycles;

pub use cost::{restore_cost, save_cost, CostProfile, SwitchCost};
pub use scratchpad::{ConfigCopyBuffer, ScratchpadState};
pub use trace::{make_trace, InstrKind, Instruction, InstructionTrace, TraceProfile};

/// The instruction currently inside the execution unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InFlight {
    pub instruction: Instruction,
    pub done: Cycles,
}

impl InFlight {
    pub fn remaining(&self) -> Cycles {
        self.instruction.cycles - self.done
    }
}

/// Everything on the accelerator side that a context switch has to reason about.
#[derive(Clone, Debug)]
pub struct AcceleratorState {
    pub scratchpad: ScratchpadState,
    pub config_buffer: ConfigCopyBuffer,
    pub in_flight: Option<InFlight>,
    /// Dispatched but not yet acknowledged instructions.
    pub queue: VecDeque<Instruction>,
    frozen: bool,
}

impl AcceleratorState {
    pub fn new(sys: &SystemParams) -> Self {
        AcceleratorState {
            scratchpad: ScratchpadState::new(sys.total_banks, sys.bank_size, sys.remap_block_size),
            config_buffer: ConfigCopyBuffer::default(),
            in_flight: None,
            queue: VecDeque::new(),
            frozen: false,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Queues an instruction. Configuration instructions execute in the reservation station
    /// and go straight to the copy buffer.
    pub fn dispatch(&mut self, instr: Instruction) {
        if self.config_buffer.record(&instr) {
            return;
        }
        self.queue.push_back(instr);
    }

    /// Runs the accelerator for `cycles`, retiring instructions in order. Issue stops while
    /// frozen, except for flush instructions. Returns the cycles actually spent executing.
    pub fn advance(&mut self, mut cycles: Cycles) -> Cycles {
        let mut spent = 0;
        while cycles > 0 {
            if self.in_flight.is_none() {
                let issuable = match self.queue.front() {
                    Some(i) => !self.frozen || i.kind == InstrKind::Flush,
                    None => false,
                };
                if !issuable {
                    break;
                }
                let instruction = self.queue.pop_front().unwrap();
                self.in_flight = Some(InFlight { instruction, done: 0 });
            }
            let f = self.in_flight.as_mut().unwrap();
            let step = cycles.min(f.remaining());
            f.done += step;
            cycles -= step;
            spent += step;
            if f.remaining() == 0 {
                self.in_flight = None;
            }
        }
        spent
    }

    /// Blocks further issue and returns the cycles until the in-flight instruction retires.
    pub fn freeze_and_drain(&mut self) -> Cycles {
        self.frozen = true;
        self.in_flight.map_or(0, |f| f.remaining())
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    /// Instructions that must be re-dispatched after a restore.
    pub fn unacknowledged(&self) -> u32 {
        self.queue.len() as u32
    }
}
