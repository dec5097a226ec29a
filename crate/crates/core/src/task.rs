//! Tasks, task sets and platform parameters.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::accel::cost::{self, CostProfile};
use crate::accel::trace::InstructionTrace;
use crate::{Cycles, Error, Result};

pub type TaskId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criticality {
    #[serde(rename = "LO")]
    Lo,
    #[serde(rename = "HI")]
    Hi,
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criticality::Lo => "LO",
            Criticality::Hi => "HI",
        })
    }
}

/// One sporadic task. Smaller `priority` means higher priority.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaskRecord", into = "TaskRecord")]
pub struct Task {
    pub id: TaskId,
    pub priority: u32,
    pub period: Cycles,
    pub deadline: Cycles,
    pub c_lo: Cycles,
    pub c_hi: Cycles,
    pub level: Criticality,
    /// Scratchpad banks the task may lock.
    pub banks: u32,
    /// Bytes staged into the scratchpad per job.
    pub footprint_bytes: u64,
    trace: Option<InstructionTrace>,
    max_instr: Cycles,
}

#[derive(Serialize, Deserialize)]
struct TaskRecord {
    id: TaskId,
    priority: u32,
    period: Cycles,
    deadline: Cycles,
    c_lo: Cycles,
    c_hi: Cycles,
    level: Criticality,
    #[serde(default)]
    banks: u32,
    #[serde(default)]
    footprint_bytes: u64,
    uses_accelerator: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trace: Option<InstructionTrace>,
}

impl TryFrom<TaskRecord> for Task {
    type Error = Error;

    fn try_from(r: TaskRecord) -> Result<Self> {
        if r.uses_accelerator != r.trace.is_some() {
            return Err(Error::InvalidTask {
                id: r.id,
                reason: "uses_accelerator must be set exactly when a trace is present".into(),
            });
        }
        let max_instr = r.trace.as_ref().map_or(0, InstructionTrace::max_instr_cycles);
        let t = Task {
            id: r.id,
            priority: r.priority,
            period: r.period,
            deadline: r.deadline,
            c_lo: r.c_lo,
            c_hi: r.c_hi,
            level: r.level,
            banks: r.banks,
            footprint_bytes: r.footprint_bytes,
            trace: r.trace,
            max_instr,
        };
        t.validate()?;
        Ok(t)
    }
}

impl From<Task> for TaskRecord {
    fn from(t: Task) -> Self {
        TaskRecord {
            id: t.id,
            priority: t.priority,
            period: t.period,
            deadline: t.deadline,
            c_lo: t.c_lo,
            c_hi: t.c_hi,
            level: t.level,
            banks: t.banks,
            footprint_bytes: t.footprint_bytes,
            uses_accelerator: t.trace.is_some(),
            trace: t.trace,
        }
    }
}

impl Task {
    /// A LO-criticality CPU-only task with an implicit deadline.
    pub fn cpu_only(id: TaskId, priority: u32, period: Cycles, c_lo: Cycles) -> Self {
        Task {
            id,
            priority,
            period,
            deadline: period,
            c_lo,
            c_hi: c_lo,
            level: Criticality::Lo,
            banks: 0,
            footprint_bytes: 0,
            trace: None,
            max_instr: 0,
        }
    }

    /// A LO-criticality accelerator task whose `c_lo` is the trace length; one bank, no footprint.
    pub fn accelerated(id: TaskId, priority: u32, period: Cycles, trace: InstructionTrace) -> Self {
        let c = trace.total_cycles();
        Task {
            id,
            priority,
            period,
            deadline: period,
            c_lo: c,
            c_hi: c,
            level: Criticality::Lo,
            banks: 1,
            footprint_bytes: 0,
            max_instr: trace.max_instr_cycles(),
            trace: Some(trace),
        }
    }

    /// Makes the task HI-criticality with the given HI-mode WCET.
    pub fn hi(mut self, c_hi: Cycles) -> Self {
        self.level = Criticality::Hi;
        self.c_hi = c_hi;
        self
    }

    pub fn with_deadline(mut self, deadline: Cycles) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn with_banks(mut self, banks: u32) -> Self {
        self.banks = banks;
        self
    }

    pub fn with_footprint(mut self, bytes: u64) -> Self {
        self.footprint_bytes = bytes;
        self
    }

    pub fn uses_accelerator(&self) -> bool {
        self.trace.is_some()
    }

    pub fn trace(&self) -> Option<&InstructionTrace> {
        self.trace.as_ref()
    }

    /// Longest single accelerator instruction; zero for CPU-only tasks.
    pub fn max_instr_cycles(&self) -> Cycles {
        self.max_instr
    }

    pub fn is_hi(&self) -> bool {
        self.level == Criticality::Hi
    }

    /// WCET at the given criticality level.
    pub fn wcet(&self, level: Criticality) -> Cycles {
        match level {
            Criticality::Lo => self.c_lo,
            Criticality::Hi => self.c_hi,
        }
    }

    pub fn utilization(&self) -> f64 {
        self.c_lo as f64 / self.period as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidTask { id: self.id, reason });
        if self.period == 0 || self.deadline == 0 || self.c_lo == 0 {
            return bad("period, deadline and c_lo must be positive".into());
        }
        if self.c_hi < self.c_lo {
            return bad(format!("c_hi {} is below c_lo {}", self.c_hi, self.c_lo));
        }
        if self.deadline > self.period {
            return bad(format!("deadline {} exceeds period {}", self.deadline, self.period));
        }
        if self.level == Criticality::Lo && self.c_hi != self.c_lo {
            return bad("LO tasks carry c_hi = c_lo".into());
        }
        match &self.trace {
            Some(tr) if tr.total_cycles() != self.c_lo => bad(format!(
                "trace totals {} cycles but c_lo is {}",
                tr.total_cycles(),
                self.c_lo
            )),
            None if self.banks != 0 || self.footprint_bytes != 0 => {
                bad("CPU-only tasks cannot hold scratchpad banks or data".into())
            }
            _ => Ok(()),
        }
    }
}

/// Tasks in priority order (highest priority first) with unique ids and priorities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Task>", into = "Vec<Task>")]
pub struct TaskSet {
    tasks: Vec<Task>,
}

impl TryFrom<Vec<Task>> for TaskSet {
    type Error = Error;
    fn try_from(v: Vec<Task>) -> Result<Self> {
        TaskSet::new(v)
    }
}

impl From<TaskSet> for Vec<Task> {
    fn from(s: TaskSet) -> Self {
        s.tasks
    }
}

/// The four relative categories of the other tasks with respect to one task.
#[derive(Clone, Debug, Default)]
pub struct Partition<'a> {
    pub hp_hi: Vec<&'a Task>,
    pub hp_lo: Vec<&'a Task>,
    pub lp_hi: Vec<&'a Task>,
    pub lp_lo: Vec<&'a Task>,
}

impl<'a> Partition<'a> {
    /// hpH ∪ hpL, in priority order.
    pub fn higher(&self) -> Vec<&'a Task> {
        let mut v: Vec<&Task> = self.hp_hi.iter().chain(&self.hp_lo).copied().collect();
        v.sort_by_key(|t| t.priority);
        v
    }

    pub fn lower(&self) -> Vec<&'a Task> {
        let mut v: Vec<&Task> = self.lp_hi.iter().chain(&self.lp_lo).copied().collect();
        v.sort_by_key(|t| t.priority);
        v
    }
}

impl TaskSet {
    pub fn new(mut tasks: Vec<Task>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut prios = HashSet::new();
        for t in &tasks {
            t.validate()?;
            if !ids.insert(t.id) {
                return Err(Error::InvalidTaskSet(format!("duplicate task id {}", t.id)));
            }
            if !prios.insert(t.priority) {
                return Err(Error::InvalidTaskSet(format!("duplicate priority {}", t.priority)));
            }
        }
        tasks.sort_by_key(|t| t.priority);
        Ok(TaskSet { tasks })
    }

    pub fn empty() -> Self {
        TaskSet::default()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Task> {
        self.tasks.iter()
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn get(&self, id: TaskId) -> Result<&Task> {
        self.tasks.iter().find(|t| t.id == id).ok_or(Error::UnknownTask(id))
    }

    pub fn index_of(&self, id: TaskId) -> Result<usize> {
        self.tasks.iter().position(|t| t.id == id).ok_or(Error::UnknownTask(id))
    }

    pub fn partition(&self, id: TaskId) -> Result<Partition<'_>> {
        let me = self.get(id)?;
        let mut p = Partition::default();
        for t in self.tasks.iter().filter(|t| t.id != id) {
            let bucket = match (t.priority < me.priority, t.level) {
                (true, Criticality::Hi) => &mut p.hp_hi,
                (true, Criticality::Lo) => &mut p.hp_lo,
                (false, Criticality::Hi) => &mut p.lp_hi,
                (false, Criticality::Lo) => &mut p.lp_lo,
            };
            bucket.push(t);
        }
        Ok(p)
    }

    pub fn total_utilization(&self) -> f64 {
        self.tasks.iter().map(Task::utilization).sum()
    }

    pub fn max_period(&self) -> Cycles {
        self.tasks.iter().map(|t| t.period).max().unwrap_or(0)
    }

    /// Least common multiple of the periods, saturating at `u64::MAX`.
    pub fn hyperperiod(&self) -> Cycles {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        self.tasks.iter().fold(1u64, |acc, t| {
            let g = gcd(acc, t.period);
            (acc / g).saturating_mul(t.period)
        })
    }

    /// Checks the set against a platform: bank demands and staged data must fit.
    pub fn validate_for(&self, sys: &SystemParams) -> Result<()> {
        sys.validate()?;
        for t in &self.tasks {
            if t.banks > sys.total_banks {
                return Err(Error::InvalidTask {
                    id: t.id,
                    reason: format!("needs {} banks, platform has {}", t.banks, sys.total_banks),
                });
            }
            if t.uses_accelerator() && t.banks == 0 {
                return Err(Error::InvalidTask {
                    id: t.id,
                    reason: "accelerator tasks need at least one bank".into(),
                });
            }
            if t.footprint_bytes > t.banks as u64 * sys.bank_size {
                return Err(Error::InvalidTask {
                    id: t.id,
                    reason: format!("footprint {} bytes does not fit in {} bank(s)", t.footprint_bytes, t.banks),
                });
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a TaskSet {
    type Item = &'a Task;
    type IntoIter = std::slice::Iter<'a, Task>;
    fn into_iter(self) -> Self::IntoIter {
        self.tasks.iter()
    }
}

/// F(Γ): the accelerator tasks.
pub fn filter_acc<'a>(tasks: impl IntoIterator<Item = &'a Task>) -> Vec<&'a Task> {
    tasks.into_iter().filter(|t| t.uses_accelerator()).collect()
}

/// F̄(Γ): the CPU-only tasks.
pub fn filter_cpu<'a>(tasks: impl IntoIterator<Item = &'a Task>) -> Vec<&'a Task> {
    tasks.into_iter().filter(|t| !t.uses_accelerator()).collect()
}

/// I(Γ): the longest accelerator instruction in the set, zero if there is none.
pub fn longest_instr<'a>(tasks: impl IntoIterator<Item = &'a Task>) -> Cycles {
    tasks.into_iter().map(Task::max_instr_cycles).max().unwrap_or(0)
}

/// Scheduler interval, overhead constants and accelerator geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// Scheduler interval.
    pub t_sr: Cycles,
    /// Accelerator context-save overhead charged by the analysis; `None` derives the
    /// worst case from the cost profile.
    pub y_acc_save: Option<Cycles>,
    /// Accelerator context-restore overhead; `None` derives it like `y_acc_save`.
    pub y_acc_restore: Option<Cycles>,
    /// CPU cost of one periodic scheduler check.
    pub y_cpu_check: Cycles,
    /// CPU cost of saving or restoring one CPU-only context.
    pub y_cpu_switch: Cycles,
    pub total_banks: u32,
    pub bank_size: u64,
    pub remap_block_size: u64,
    pub accumulator_size: u64,
    /// When false every accelerator context switch evicts the outgoing task's banks.
    pub bank_allocation: bool,
    pub cost: CostProfile,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            t_sr: 5000,
            y_acc_save: None,
            y_acc_restore: None,
            y_cpu_check: 100,
            y_cpu_switch: 2000,
            total_banks: 8,
            bank_size: 32 * 1024,
            remap_block_size: 4096,
            accumulator_size: 64 * 1024,
            bank_allocation: true,
            cost: CostProfile::default(),
        }
    }
}

impl SystemParams {
    /// Parameters with every overhead set to zero; handy for hand-checked analyses.
    pub fn zero_overhead(t_sr: Cycles) -> Self {
        SystemParams {
            t_sr,
            y_acc_save: Some(0),
            y_acc_restore: Some(0),
            y_cpu_check: 0,
            y_cpu_switch: 0,
            ..SystemParams::default()
        }
    }

    /// Υ^S.
    pub fn y_save(&self) -> Cycles {
        self.y_acc_save.unwrap_or_else(|| cost::worst_case_save(self))
    }

    /// Υ^R.
    pub fn y_restore(&self) -> Cycles {
        self.y_acc_restore.unwrap_or_else(|| cost::worst_case_restore(self))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if self.t_sr == 0 {
            return bad("t_sr must be positive");
        }
        if self.total_banks == 0 {
            return bad("total_banks must be at least 1");
        }
        if self.bank_size == 0 || self.remap_block_size == 0 {
            return bad("bank and remapping-block sizes must be positive");
        }
        if self.y_cpu_check >= self.t_sr {
            return bad("scheduler check overhead must be shorter than t_sr");
        }
        self.cost.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(id: TaskId, prio: u32, max_instr: Cycles) -> Task {
        Task::accelerated(id, prio, 1_000_000, InstructionTrace::uniform(100_000, max_instr).unwrap())
    }

    #[test]
    fn lone_task_has_empty_partition() {
        let s = TaskSet::new(vec![Task::cpu_only(1, 1, 100, 10)]).unwrap();
        let p = s.partition(1).unwrap();
        assert!(p.hp_hi.is_empty() && p.hp_lo.is_empty() && p.lp_hi.is_empty() && p.lp_lo.is_empty());
    }

    #[test]
    fn partition_by_priority_and_level() {
        let s = TaskSet::new(vec![
            Task::cpu_only(1, 1, 100, 10).hi(20),
            Task::cpu_only(2, 2, 100, 10),
            Task::cpu_only(3, 3, 100, 10).hi(20),
        ])
        .unwrap();
        let p = s.partition(2).unwrap();
        let ids = |v: &[&Task]| v.iter().map(|t| t.id).collect::<Vec<_>>();
        assert_eq!(ids(&p.hp_hi), vec![1]);
        assert!(p.hp_lo.is_empty());
        assert_eq!(ids(&p.lp_hi), vec![3]);
        assert!(p.lp_lo.is_empty());
        assert!(matches!(s.partition(9), Err(Error::UnknownTask(9))));
    }

    #[test]
    fn longest_instr_skips_cpu_tasks() {
        let a = acc(1, 1, 3000);
        let b = Task::cpu_only(2, 2, 1_000_000, 9000);
        let c = acc(3, 3, 7000);
        assert_eq!(longest_instr([&a, &b, &c]), 7000);
        assert_eq!(longest_instr([&a]), 3000);
        assert_eq!(longest_instr(std::iter::empty()), 0);
        assert_eq!(filter_acc([&a, &b, &c]).len(), 2);
        assert_eq!(filter_cpu([&a, &b, &c]).len(), 1);
    }

    #[test]
    fn duplicate_priorities_rejected() {
        let r = TaskSet::new(vec![Task::cpu_only(1, 1, 100, 10), Task::cpu_only(2, 1, 100, 10)]);
        assert!(matches!(r, Err(Error::InvalidTaskSet(_))));
    }

    #[test]
    fn task_invariants() {
        assert!(Task::cpu_only(1, 1, 100, 10).with_deadline(200).validate().is_err());
        assert!(Task::cpu_only(1, 1, 100, 10).hi(5).validate().is_err());
        assert!(Task::cpu_only(1, 1, 100, 0).validate().is_err());
        let mut t = acc(1, 1, 1000);
        t.c_lo = 5;
        t.c_hi = 5;
        assert!(t.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = TaskSet::new(vec![acc(1, 2, 3000).hi(150_000), Task::cpu_only(2, 1, 50_000, 1000)]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: TaskSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.tasks()[0].id, 2);
        assert_eq!(back.get(1).unwrap().max_instr_cycles(), 3000);
    }

    #[test]
    fn hyperperiod_is_lcm() {
        let s = TaskSet::new(vec![Task::cpu_only(1, 1, 4, 1), Task::cpu_only(2, 2, 6, 1)]).unwrap();
        assert_eq!(s.hyperperiod(), 12);
    }
}
