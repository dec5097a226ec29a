//! Banked scratchpad with per-bank locks and the address remapper.

use serde::Serialize;

use crate::accel::trace::{ConfigClass, InstrKind, Instruction};
use crate::task::TaskId;
use crate::{Error, Result};

/// Bytes of remapping block consumed by one mapping entry (start, end, bank, offset).
pub const REMAP_ENTRY_BYTES: u64 = 16;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Bank {
    pub locked_by: Option<TaskId>,
    pub bytes_valid: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RemapEntry {
    pub task: TaskId,
    /// Original address range `[start, end)`.
    pub start: u64,
    pub end: u64,
    pub bank: usize,
    pub offset: u64,
}

/// Where one slice of a write landed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement {
    pub bank: usize,
    pub offset: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RemappingBlock {
    entries: Vec<RemapEntry>,
    capacity: usize,
}

impl RemappingBlock {
    pub fn new(capacity_bytes: u64) -> Self {
        RemappingBlock {
            entries: Vec::new(),
            capacity: (capacity_bytes / REMAP_ENTRY_BYTES) as usize,
        }
    }

    pub fn entries(&self) -> &[RemapEntry] {
        &self.entries
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries_of(&self, task: TaskId) -> impl Iterator<Item = &RemapEntry> {
        self.entries.iter().filter(move |e| e.task == task)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScratchpadState {
    banks: Vec<Bank>,
    bank_size: u64,
    remap: RemappingBlock,
}

impl ScratchpadState {
    pub fn new(total_banks: u32, bank_size: u64, remap_block_bytes: u64) -> Self {
        ScratchpadState {
            banks: vec![Bank::default(); total_banks as usize],
            bank_size,
            remap: RemappingBlock::new(remap_block_bytes),
        }
    }

    pub fn banks(&self) -> &[Bank] {
        &self.banks
    }

    pub fn bank_size(&self) -> u64 {
        self.bank_size
    }

    pub fn remap(&self) -> &RemappingBlock {
        &self.remap
    }

    pub fn locked_by(&self, task: TaskId) -> u32 {
        self.banks.iter().filter(|b| b.locked_by == Some(task)).count() as u32
    }

    pub fn locked_banks(&self) -> u32 {
        self.banks.iter().filter(|b| b.locked_by.is_some()).count() as u32
    }

    pub fn free_banks(&self) -> u32 {
        self.banks.len() as u32 - self.locked_banks()
    }

    /// Tasks holding at least one bank, in bank order without repeats.
    pub fn resident_tasks(&self) -> Vec<TaskId> {
        let mut out = Vec::new();
        for t in self.banks.iter().filter_map(|b| b.locked_by) {
            if !out.contains(&t) {
                out.push(t);
            }
        }
        out
    }

    pub fn is_resident(&self, task: TaskId) -> bool {
        self.banks.iter().any(|b| b.locked_by == Some(task))
    }

    /// Stages `bytes` of `task`'s data at original address `addr`, filling the task's
    /// partially used banks first and then locking the lowest free banks, never letting the
    /// task hold more than `eta` banks. Nothing changes when the write cannot be placed.
    pub fn remap_write(&mut self, task: TaskId, eta: u32, addr: u64, bytes: u64) -> Result<Vec<Placement>> {
        if bytes == 0 {
            return Ok(Vec::new());
        }
        let mut plan = Vec::new();
        let mut left = bytes;
        for (i, b) in self.banks.iter().enumerate() {
            if left == 0 {
                break;
            }
            if b.locked_by == Some(task) && b.bytes_valid < self.bank_size {
                let n = left.min(self.bank_size - b.bytes_valid);
                plan.push(Placement { bank: i, offset: b.bytes_valid, bytes: n });
                left -= n;
            }
        }
        let mut held = self.locked_by(task);
        for (i, b) in self.banks.iter().enumerate() {
            if left == 0 || held >= eta {
                break;
            }
            if b.locked_by.is_none() {
                let n = left.min(self.bank_size);
                plan.push(Placement { bank: i, offset: 0, bytes: n });
                left -= n;
                held += 1;
            }
        }
        if left > 0 {
            if held >= eta {
                return Err(Error::AllocationExceeded { task, allowed: eta });
            }
            return Err(Error::BanksUnavailable {
                task,
                needed: self.bank_size_ceil(left),
            });
        }
        if self.remap.entries.len() + plan.len() > self.remap.capacity {
            return Err(Error::CapacityExceeded {
                capacity: self.remap.capacity,
            });
        }
        let mut start = addr;
        for p in &plan {
            let bank = &mut self.banks[p.bank];
            bank.locked_by = Some(task);
            bank.bytes_valid += p.bytes;
            self.remap.entries.push(RemapEntry {
                task,
                start,
                end: start + p.bytes,
                bank: p.bank,
                offset: p.offset,
            });
            start += p.bytes;
        }
        Ok(plan)
    }

    fn bank_size_ceil(&self, bytes: u64) -> u32 {
        bytes.div_ceil(self.bank_size) as u32
    }

    /// Translates an original address of `task` to (bank, offset). The newest mapping wins.
    pub fn remap_read(&self, task: TaskId, addr: u64) -> Result<(usize, u64)> {
        self.remap
            .entries
            .iter()
            .rev()
            .find(|e| e.task == task && e.start <= addr && addr < e.end)
            .map(|e| (e.bank, e.offset + (addr - e.start)))
            .ok_or(Error::TranslationFault { task, addr })
    }

    /// Unlocks every bank held by `task` and drops its mappings; returns the bank count.
    pub fn release_banks(&mut self, task: TaskId) -> u32 {
        let mut freed = 0;
        for b in self.banks.iter_mut().filter(|b| b.locked_by == Some(task)) {
            b.locked_by = None;
            b.bytes_valid = 0;
            freed += 1;
        }
        self.remap.entries.retain(|e| e.task != task);
        freed
    }

    /// Checks lock bounds against each task's allowance and the mapping invariants.
    pub fn check(&self, allowance: impl Fn(TaskId) -> u32) -> std::result::Result<(), String> {
        for t in self.resident_tasks() {
            let held = self.locked_by(t);
            if held > allowance(t) {
                return Err(format!("task {t} holds {held} banks, allowed {}", allowance(t)));
            }
        }
        for (i, b) in self.banks.iter().enumerate() {
            if b.bytes_valid > self.bank_size {
                return Err(format!("bank {i} holds {} bytes", b.bytes_valid));
            }
            if b.locked_by.is_none() && b.bytes_valid != 0 {
                return Err(format!("unlocked bank {i} holds data"));
            }
        }
        let es = &self.remap.entries;
        for (k, e) in es.iter().enumerate() {
            if self.banks[e.bank].locked_by != Some(e.task) {
                return Err(format!("mapping of task {} points at bank {} it does not hold", e.task, e.bank));
            }
            let (lo, hi) = (e.offset, e.offset + (e.end - e.start));
            for f in &es[k + 1..] {
                if f.bank == e.bank && f.offset < hi && lo < f.offset + (f.end - f.start) {
                    return Err(format!("overlapping physical ranges in bank {}", e.bank));
                }
            }
        }
        Ok(())
    }
}

/// Latest configuration instruction of each class.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigCopyBuffer {
    slots: [Option<Instruction>; 4],
}

impl ConfigCopyBuffer {
    /// Keeps `instr` if it is a configuration instruction; returns whether it was kept.
    pub fn record(&mut self, instr: &Instruction) -> bool {
        match (instr.kind, instr.config_class) {
            (InstrKind::Config, Some(class)) => {
                self.slots[class.index()] = Some(*instr);
                true
            }
            _ => false,
        }
    }

    pub fn get(&self, class: ConfigClass) -> Option<&Instruction> {
        self.slots[class.index()].as_ref()
    }

    pub fn len(&self) -> usize {
        self.slots.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Instructions to re-issue after a restore, in class order.
    pub fn replay(&self) -> Vec<Instruction> {
        self.slots.iter().flatten().copied().collect()
    }

    pub fn clear(&mut self) {
        self.slots = Default::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pad() -> ScratchpadState {
        ScratchpadState::new(8, 32 * 1024, 4096)
    }

    #[test]
    fn first_write_locks_bank_zero() {
        let mut s = pad();
        let p = s.remap_write(7, 1, 0x1000, 1024).unwrap();
        assert_eq!(p, vec![Placement { bank: 0, offset: 0, bytes: 1024 }]);
        assert_eq!(s.banks()[0].locked_by, Some(7));
        assert_eq!(s.remap().entries().len(), 1);
        assert_eq!(s.remap().capacity(), 256);
    }

    #[test]
    fn spill_past_allocation_fails_atomically() {
        let mut s = pad();
        s.remap_write(1, 1, 0, 32 * 1024).unwrap();
        let before = s.clone();
        assert!(matches!(
            s.remap_write(1, 1, 32 * 1024, 1024),
            Err(Error::AllocationExceeded { task: 1, allowed: 1 })
        ));
        assert_eq!(s, before);
        let mut s = pad();
        assert!(s.remap_write(1, 1, 0, 33 * 1024).is_err());
        assert_eq!(s.locked_banks(), 0);
    }

    #[test]
    fn full_scratchpad_reports_unavailable() {
        let mut s = ScratchpadState::new(2, 1024, 4096);
        s.remap_write(1, 2, 0, 2048).unwrap();
        assert!(matches!(s.remap_write(2, 1, 0, 10), Err(Error::BanksUnavailable { task: 2, .. })));
    }

    #[test]
    fn read_translates_and_faults_after_release() {
        let mut s = pad();
        s.remap_write(3, 2, 0x4000, 40_000).unwrap();
        assert_eq!(s.remap_read(3, 0x4000).unwrap(), (0, 0));
        assert_eq!(s.remap_read(3, 0x4000 + 32 * 1024 + 5).unwrap(), (1, 5));
        assert!(s.remap_read(4, 0x4000).is_err());
        assert_eq!(s.release_banks(3), 2);
        assert!(matches!(s.remap_read(3, 0x4000), Err(Error::TranslationFault { task: 3, .. })));
        assert_eq!(s.release_banks(3), 0);
    }

    #[test]
    fn partial_bank_is_refilled_before_new_bank() {
        let mut s = pad();
        s.remap_write(1, 2, 0, 1000).unwrap();
        let p = s.remap_write(1, 2, 5000, 1000).unwrap();
        assert_eq!(p, vec![Placement { bank: 0, offset: 1000, bytes: 1000 }]);
        assert_eq!(s.remap_read(1, 5500).unwrap(), (0, 1500));
    }

    #[test]
    fn config_buffer_keeps_newest_per_class() {
        let mut b = ConfigCopyBuffer::default();
        assert!(b.record(&Instruction::config(ConfigClass::ExecCfg)));
        assert!(b.record(&Instruction::config(ConfigClass::ExecCfg)));
        assert!(!b.record(&Instruction::compute(10)));
        assert_eq!(b.len(), 1);
        for c in ConfigClass::ALL {
            b.record(&Instruction::config(c));
        }
        assert_eq!(b.len(), 4);
        let classes: Vec<_> = b.replay().iter().map(|i| i.config_class.unwrap()).collect();
        assert_eq!(classes, ConfigClass::ALL.to_vec());
        b.clear();
        assert!(b.is_empty());
    }
}
