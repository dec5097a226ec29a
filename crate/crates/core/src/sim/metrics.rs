use serde::Serialize;

use crate::task::{Criticality, TaskId};
use crate::Cycles;

use super::Mode;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct JobCounts {
    pub released: u64,
    pub completed: u64,
    pub missed: u64,
    pub dropped: u64,
}

impl JobCounts {
    fn add(&mut self, o: &JobCounts) {
        self.released += o.released;
        self.completed += o.completed;
        self.missed += o.missed;
        self.dropped += o.dropped;
    }
}

/// Job counters of one criticality level, split by the mode at release.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LevelCounts {
    pub lo_mode: JobCounts,
    pub transition: JobCounts,
    pub hi_mode: JobCounts,
    pub in_flight: u64,
}

impl LevelCounts {
    pub fn by_mode(&mut self, m: Mode) -> &mut JobCounts {
        match m {
            Mode::LoMode => &mut self.lo_mode,
            Mode::Transition => &mut self.transition,
            Mode::HiMode => &mut self.hi_mode,
        }
    }

    pub fn in_mode(&self, m: Mode) -> &JobCounts {
        match m {
            Mode::LoMode => &self.lo_mode,
            Mode::Transition => &self.transition,
            Mode::HiMode => &self.hi_mode,
        }
    }

    pub fn total(&self) -> JobCounts {
        let mut t = JobCounts::default();
        for c in [&self.lo_mode, &self.transition, &self.hi_mode] {
            t.add(c);
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Release,
    Complete,
    Miss,
    Drop,
    Overrun,
    ModeChange,
    Preempt,
    Save,
    Restore,
    Start,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub time: Cycles,
    pub kind: EventKind,
    pub task: Option<TaskId>,
    pub duration: Cycles,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SimMetrics {
    pub horizon: Cycles,
    pub pi_inversions: Vec<Cycles>,
    pub ci_inversions: Vec<Cycles>,
    /// Cycles of every context save that moved accelerator state out.
    pub save_cycles: Vec<Cycles>,
    /// Cycles of every context restore that moved accelerator state back in.
    pub restore_cycles: Vec<Cycles>,
    pub lo: LevelCounts,
    pub hi: LevelCounts,
    /// LO jobs released outside LO-mode, and how many of those completed.
    pub lo_released_in_hi: u64,
    pub lo_completed_in_hi: u64,
    /// Entries into the mode transition.
    pub mode_switches: u64,
    /// Misses the analysis promises to exclude: any HI miss, or a LO miss of a job that
    /// lived entirely in LO-mode.
    pub guaranteed_misses: u64,
    pub success: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<TraceEvent>,
}

pub fn mean(v: &[Cycles]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64)
    }
}

impl SimMetrics {
    pub fn level(&self, l: Criticality) -> &LevelCounts {
        match l {
            Criticality::Lo => &self.lo,
            Criticality::Hi => &self.hi,
        }
    }

    pub fn level_mut(&mut self, l: Criticality) -> &mut LevelCounts {
        match l {
            Criticality::Lo => &mut self.lo,
            Criticality::Hi => &mut self.hi,
        }
    }

    pub fn misses(&self) -> u64 {
        self.lo.total().missed + self.hi.total().missed
    }

    pub fn hi_misses(&self) -> u64 {
        self.hi.total().missed
    }

    pub fn survivability(&self) -> Option<f64> {
        (self.lo_released_in_hi > 0).then(|| self.lo_completed_in_hi as f64 / self.lo_released_in_hi as f64)
    }

    pub fn mean_pi(&self) -> Option<f64> {
        mean(&self.pi_inversions)
    }

    pub fn mean_ci(&self) -> Option<f64> {
        mean(&self.ci_inversions)
    }

    pub fn mean_save(&self) -> Option<f64> {
        mean(&self.save_cycles)
    }

    pub fn mean_restore(&self) -> Option<f64> {
        mean(&self.restore_cycles)
    }

    /// released = completed + missed + dropped + in-flight, per level.
    pub fn conserved(&self) -> bool {
        [&self.lo, &self.hi].iter().all(|l| {
            let t = l.total();
            t.released == t.completed + t.missed + t.dropped + l.in_flight
        })
    }
}
