//! Cycle costs of accelerator context save and restore.
//!
//! Bank contents and the accumulator are moved out and back step-wise, one DMA beat
//! at a time through the normal load/store path. The config-copy buffer and the
//! remapping block are small and move as bulk transfers.

use serde::{Deserialize, Serialize};

use crate::accel::scratchpad::ScratchpadState;
use crate::task::{SystemParams, Task, TaskId};
use crate::{div_ceil, Cycles, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostProfile {
    pub beat_bytes: u64,
    pub stepwise_cycles_per_beat: Cycles,
    pub bulk_cycles_per_beat: Cycles,
    pub transfer_setup: Cycles,
    /// Flushing the instruction queues before a save.
    pub preprocess: Cycles,
    /// TLB and pipeline flush closing a save.
    pub flush: Cycles,
    pub config_entry_bytes: u64,
    /// Re-issuing one configuration instruction from the copy buffer.
    pub reconfig_per_entry: Cycles,
    /// Re-dispatching one instruction that was queued but not acknowledged.
    pub redispatch_per_instr: Cycles,
    pub queue_depth: u32,
}

impl Default for CostProfile {
    fn default() -> Self {
        CostProfile {
            beat_bytes: 64,
            stepwise_cycles_per_beat: 4,
            bulk_cycles_per_beat: 1,
            transfer_setup: 100,
            preprocess: 200,
            flush: 200,
            config_entry_bytes: 16,
            reconfig_per_entry: 2,
            redispatch_per_instr: 10,
            queue_depth: 16,
        }
    }
}

impl CostProfile {
    pub fn validate(&self) -> Result<()> {
        if self.beat_bytes == 0 {
            return Err(Error::InvalidParam("beat_bytes must be positive".into()));
        }
        Ok(())
    }

    fn stepwise(&self, bytes: u64) -> Cycles {
        self.transfer_setup + div_ceil(bytes, self.beat_bytes) * self.stepwise_cycles_per_beat
    }

    fn bulk(&self, bytes: u64) -> Cycles {
        self.transfer_setup + div_ceil(bytes, self.beat_bytes) * self.bulk_cycles_per_beat
    }
}

/// Moving one full bank out or in.
pub fn per_bank(sys: &SystemParams) -> Cycles {
    sys.cost.stepwise(sys.bank_size)
}

pub fn accumulator(sys: &SystemParams) -> Cycles {
    sys.cost.stepwise(sys.accumulator_size)
}

pub fn config_buffer(sys: &SystemParams) -> Cycles {
    sys.cost.bulk(4 * sys.cost.config_entry_bytes)
}

pub fn remap_block(sys: &SystemParams) -> Cycles {
    sys.cost.bulk(sys.remap_block_size)
}

/// Accelerator save cost independent of bank eviction: queue preprocessing, accumulator,
/// config-copy buffer, remapping block and the closing flush.
pub fn save_fixed(sys: &SystemParams) -> Cycles {
    sys.cost.preprocess + accumulator(sys) + config_buffer(sys) + remap_block(sys) + sys.cost.flush
}

/// Restore cost independent of reloaded banks and re-dispatched instructions.
pub fn restore_fixed(sys: &SystemParams) -> Cycles {
    config_buffer(sys) + 4 * sys.cost.reconfig_per_entry + accumulator(sys) + remap_block(sys)
}

/// Largest save any context switch can incur: the CPU context, the fixed accelerator part
/// and evicting every bank.
pub fn worst_case_save(sys: &SystemParams) -> Cycles {
    sys.y_cpu_switch + save_fixed(sys) + sys.total_banks as Cycles * per_bank(sys)
}

/// Largest restore: CPU context, every bank reloaded and a full queue re-dispatched.
pub fn worst_case_restore(sys: &SystemParams) -> Cycles {
    sys.y_cpu_switch
        + restore_fixed(sys)
        + sys.total_banks as Cycles * per_bank(sys)
        + sys.cost.queue_depth as Cycles * sys.cost.redispatch_per_instr
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SwitchCost {
    pub cycles: Cycles,
    pub evicted_banks: u32,
}

/// Whether saving `current` must evict its banks to make room for `next`.
///
/// Banks stay in place when bank allocation is enabled and the free banks already cover
/// what `next` still has to lock.
pub fn must_evict(state: &ScratchpadState, next: Option<&Task>, sys: &SystemParams) -> bool {
    if !sys.bank_allocation {
        return true;
    }
    match next {
        Some(n) => n.banks.saturating_sub(state.locked_by(n.id)) > state.free_banks(),
        None => false,
    }
}

/// Cost of saving `current`'s accelerator context ahead of running `next`.
pub fn save_cost(state: &ScratchpadState, current: TaskId, next: Option<&Task>, sys: &SystemParams) -> SwitchCost {
    let evicted_banks = if must_evict(state, next, sys) { state.locked_by(current) } else { 0 };
    SwitchCost {
        cycles: save_fixed(sys) + evicted_banks as Cycles * per_bank(sys),
        evicted_banks,
    }
}

/// Banks of data `task` stages per job.
pub fn data_banks(task: &Task, sys: &SystemParams) -> u32 {
    div_ceil(task.footprint_bytes, sys.bank_size).min(task.banks as u64) as u32
}

/// Cost of restoring `task`: the fixed part, reloading whatever of its data is not resident,
/// and re-dispatching `unacked` queued instructions.
pub fn restore_cost(state: &ScratchpadState, task: &Task, unacked: u32, sys: &SystemParams) -> Cycles {
    let missing = data_banks(task, sys).saturating_sub(state.locked_by(task.id));
    restore_fixed(sys)
        + missing as Cycles * per_bank(sys)
        + unacked.min(sys.cost.queue_depth) as Cycles * sys.cost.redispatch_per_instr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::trace::InstructionTrace;

    fn task(id: TaskId, prio: u32, banks: u32) -> Task {
        Task::accelerated(id, prio, 10_000_000, InstructionTrace::uniform(1_000_000, 5000).unwrap())
            .with_banks(banks)
            .with_footprint(banks as u64 * 32 * 1024)
    }

    #[test]
    fn default_constants() {
        let sys = SystemParams::default();
        assert_eq!(per_bank(&sys), 100 + 512 * 4);
        assert_eq!(config_buffer(&sys), 101);
        assert_eq!(remap_block(&sys), 164);
        assert_eq!(save_fixed(&sys), 200 + 4196 + 101 + 164 + 200);
        assert_eq!(worst_case_save(&sys), sys.y_save());
    }

    #[test]
    fn fitting_next_task_keeps_banks() {
        let sys = SystemParams::default();
        let mut s = ScratchpadState::new(8, sys.bank_size, sys.remap_block_size);
        s.remap_write(1, 2, 0, 2 * 32 * 1024).unwrap();
        let next = task(2, 1, 3);
        let c = save_cost(&s, 1, Some(&next), &sys);
        assert_eq!(c, SwitchCost { cycles: save_fixed(&sys), evicted_banks: 0 });
    }

    #[test]
    fn next_needing_everything_evicts_current() {
        let sys = SystemParams::default();
        let mut s = ScratchpadState::new(8, sys.bank_size, sys.remap_block_size);
        s.remap_write(1, 2, 0, 2 * 32 * 1024).unwrap();
        let next = task(2, 1, 8);
        let c = save_cost(&s, 1, Some(&next), &sys);
        assert_eq!(c.evicted_banks, 2);
        let delta = c.cycles - save_fixed(&sys);
        assert!((4000..=6000).contains(&delta), "{delta}");
    }

    #[test]
    fn restore_reloads_only_missing_banks() {
        let sys = SystemParams::default();
        let mut s = ScratchpadState::new(8, sys.bank_size, sys.remap_block_size);
        let t = task(1, 1, 3);
        assert_eq!(restore_cost(&s, &t, 0, &sys), restore_fixed(&sys) + 3 * per_bank(&sys));
        s.remap_write(1, 3, 0, t.footprint_bytes).unwrap();
        assert_eq!(restore_cost(&s, &t, 0, &sys), restore_fixed(&sys));
        assert_eq!(restore_cost(&s, &t, 100, &sys), restore_fixed(&sys) + 16 * 10);
    }

    #[test]
    fn disabled_allocation_always_evicts() {
        let sys = SystemParams {
            bank_allocation: false,
            ..SystemParams::default()
        };
        let mut s = ScratchpadState::new(8, sys.bank_size, sys.remap_block_size);
        s.remap_write(1, 1, 0, 100).unwrap();
        assert_eq!(save_cost(&s, 1, None, &sys).evicted_banks, 1);
    }
}
