//! Worst-case response-time analysis for LO-mode, HI-mode and the mode transition.
//!
//! Blocking comes from two sources. A lower-priority accelerator task may hold the
//! accelerator until its current instruction retires (priority inversion), and in the
//! transition or HI-mode a LO task may do the same to a HI task (criticality inversion).
//! Either way the wait is bounded by the longest instruction of the blockers plus one
//! scheduler interval, because switches only happen at scheduler checks.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::task::{filter_acc, longest_instr, Criticality, SystemParams, Task, TaskId, TaskSet};
use crate::{div_ceil, Cycles, Error, Result};

/// Safety net on fixed-point iterations.
pub const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Bounded(Cycles),
    /// The iteration passed the deadline before converging.
    Unschedulable,
}

impl Response {
    pub fn bound(self) -> Option<Cycles> {
        match self {
            Response::Bounded(r) => Some(r),
            Response::Unschedulable => None,
        }
    }

    pub fn meets(self, deadline: Cycles) -> bool {
        matches!(self, Response::Bounded(r) if r <= deadline)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HiAnalysis {
    pub pb_hi: Cycles,
    pub cb_hi: Cycles,
    pub b_hi: Cycles,
    pub r_hi: Response,
    pub pb_star: Cycles,
    pub cb_star: Cycles,
    pub b_star: Cycles,
    pub r_star: Response,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskAnalysis {
    pub id: TaskId,
    pub level: Criticality,
    pub deadline: Cycles,
    pub pb_lo: Cycles,
    pub b_lo: Cycles,
    pub r_lo: Response,
    pub hi: Option<HiAnalysis>,
}

impl TaskAnalysis {
    pub fn schedulable(&self) -> bool {
        self.r_lo.meets(self.deadline)
            && self
                .hi
                .as_ref()
                .is_none_or(|h| h.r_hi.meets(self.deadline) && h.r_star.meets(self.deadline))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisResult {
    pub tasks: Vec<TaskAnalysis>,
    pub schedulable: bool,
    pub diverged: BTreeSet<TaskId>,
}

/// Ascending iteration of `f` from `start`; gives up once the value exceeds `limit`.
pub fn fixed_point(start: Cycles, limit: Cycles, mut f: impl FnMut(Cycles) -> Cycles) -> Response {
    let mut r = start;
    for _ in 0..MAX_ITERATIONS {
        if r > limit {
            return Response::Unschedulable;
        }
        let next = f(r);
        if next == r {
            return Response::Bounded(r);
        }
        r = next;
    }
    Response::Unschedulable
}

fn interference(window: Cycles, period: Cycles, cost: Cycles) -> Cycles {
    div_ceil(window, period).saturating_mul(cost)
}

fn check_cost(window: Cycles, sys: &SystemParams) -> Cycles {
    interference(window, sys.t_sr, sys.y_cpu_check)
}

/// Per-job preemption overhead charged for an interfering task.
fn switch_overhead(t: &Task, sys: &SystemParams) -> Cycles {
    if t.uses_accelerator() {
        sys.y_save() + sys.y_restore()
    } else {
        2 * sys.y_cpu_switch
    }
}

fn hi_task(gamma: &TaskSet, i: TaskId) -> Result<&Task> {
    let t = gamma.get(i)?;
    if !t.is_hi() {
        return Err(Error::NotHiTask(i));
    }
    Ok(t)
}

/// LO-mode priority-inversion blocking: the longest instruction of any lower-priority
/// accelerator task plus one scheduler interval.
pub fn pb_lo(i: TaskId, gamma: &TaskSet, sys: &SystemParams) -> Result<Cycles> {
    let p = gamma.partition(i)?;
    Ok(longest_instr(filter_acc(p.lower())) + sys.t_sr)
}

/// LO-mode blocking; there is no criticality inversion in LO-mode.
pub fn b_lo(i: TaskId, gamma: &TaskSet, sys: &SystemParams) -> Result<Cycles> {
    pb_lo(i, gamma, sys)
}

pub fn response_lo(i: TaskId, gamma: &TaskSet, sys: &SystemParams) -> Result<Response> {
    let me = gamma.get(i)?;
    let b = b_lo(i, gamma, sys)?;
    let hp = gamma.partition(i)?.higher();
    let base = b + me.c_lo + sys.y_save() + sys.y_restore();
    Ok(fixed_point(base, me.deadline, |r| {
        hp.iter().fold(base + check_cost(r, sys), |acc, t| {
            acc.saturating_add(interference(r, t.period, switch_overhead(t, sys) + t.c_lo))
        })
    }))
}

/// HI-mode priority-inversion blocking from lower-priority HI tasks.
pub fn pb_hi(i: TaskId, gamma: &TaskSet, sys: &SystemParams) -> Result<Cycles> {
    hi_task(gamma, i)?;
    let p = gamma.partition(i)?;
    Ok(longest_instr(filter_acc(p.lp_hi.iter().copied())) + sys.t_sr)
}

/// HI-mode criticality-inversion blocking from any LO task, higher or lower priority.
pub fn cb_hi(i: TaskId, gamma: &TaskSet, sys: &SystemParams) -> Result<Cycles> {
    hi_task(gamma, i)?;
    let p = gamma.partition(i)?;
    Ok(longest_instr(filter_acc(p.lp_lo.iter().chain(&p.hp_lo).copied())) + sys.t_sr)
}

pub fn b_hi(i: TaskId, gamma: &TaskSet, sys: &SystemParams) -> Result<Cycles> {
    hi_task(gamma, i)?;
    let p = gamma.partition(i)?;
    let blockers = p.lp_lo.iter().chain(&p.hp_lo).chain(&p.lp_hi).copied();
    Ok(longest_instr(filter_acc(blockers)) + sys.t_sr)
}

/// HI-mode response time: only higher-priority HI tasks preempt, everyone at `c_hi`.
pub fn response_hi(i: TaskId, gamma: &TaskSet, sys: &SystemParams) -> Result<Response> {
    let me = hi_task(gamma, i)?;
    let b = b_hi(i, gamma, sys)?;
    let p = gamma.partition(i)?;
    let base = b + me.c_hi + sys.y_save() + sys.y_restore();
    Ok(fixed_point(base, me.deadline, |r| {
        p.hp_hi.iter().fold(base + check_cost(r, sys), |acc, t| {
            acc.saturating_add(interference(r, t.period, switch_overhead(t, sys) + t.c_hi))
        })
    }))
}

/// Blocking during the mode transition; identical to the HI-mode terms.
pub fn blocking_star(i: TaskId, gamma: &TaskSet, sys: &SystemParams) -> Result<(Cycles, Cycles, Cycles)> {
    Ok((pb_hi(i, gamma, sys)?, cb_hi(i, gamma, sys)?, b_hi(i, gamma, sys)?))
}

/// Response time across the mode transition. Higher-priority LO tasks can only have been
/// released before the switch, so their interference is counted over the LO-mode window
/// `r_lo`, which stays fixed during the iteration.
pub fn response_star(i: TaskId, gamma: &TaskSet, sys: &SystemParams, r_lo: Response) -> Result<Response> {
    let me = hi_task(gamma, i)?;
    let Response::Bounded(r_lo) = r_lo else {
        return Ok(Response::Unschedulable);
    };
    let (_, _, b) = blocking_star(i, gamma, sys)?;
    let p = gamma.partition(i)?;
    let lo_part = p.hp_lo.iter().fold(0u64, |acc, t| {
        acc.saturating_add(interference(r_lo, t.period, switch_overhead(t, sys) + t.c_lo))
    });
    let base = b + me.c_hi + sys.y_save() + sys.y_restore();
    Ok(fixed_point(base, me.deadline, |r| {
        p.hp_hi.iter().fold(base + check_cost(r, sys) + lo_part, |acc, t| {
            acc.saturating_add(interference(r, t.period, switch_overhead(t, sys) + t.c_hi))
        })
    }))
}

pub fn analyze_task(i: TaskId, gamma: &TaskSet, sys: &SystemParams) -> Result<TaskAnalysis> {
    let t = gamma.get(i)?;
    let pb = pb_lo(i, gamma, sys)?;
    let r_lo = response_lo(i, gamma, sys)?;
    let hi = if t.is_hi() {
        let (pb_star, cb_star, b_star) = blocking_star(i, gamma, sys)?;
        Some(HiAnalysis {
            pb_hi: pb_hi(i, gamma, sys)?,
            cb_hi: cb_hi(i, gamma, sys)?,
            b_hi: b_hi(i, gamma, sys)?,
            r_hi: response_hi(i, gamma, sys)?,
            pb_star,
            cb_star,
            b_star,
            r_star: response_star(i, gamma, sys, r_lo)?,
        })
    } else {
        None
    };
    Ok(TaskAnalysis {
        id: i,
        level: t.level,
        deadline: t.deadline,
        pb_lo: pb,
        b_lo: b_lo(i, gamma, sys)?,
        r_lo,
        hi,
    })
}

pub fn analyze(gamma: &TaskSet, sys: &SystemParams) -> Result<AnalysisResult> {
    let tasks = gamma
        .iter()
        .map(|t| analyze_task(t.id, gamma, sys))
        .collect::<Result<Vec<_>>>()?;
    let diverged = tasks.iter().filter(|a| !a.schedulable()).map(|a| a.id).collect::<BTreeSet<_>>();
    Ok(AnalysisResult {
        schedulable: diverged.is_empty(),
        tasks,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::trace::InstructionTrace;

    fn sys() -> SystemParams {
        SystemParams {
            y_acc_save: Some(1000),
            y_acc_restore: Some(1000),
            y_cpu_check: 100,
            ..SystemParams::zero_overhead(5000)
        }
    }

    /// τ1 (accelerator, C=10000, T=100000, longest instruction 3000) above τ2 (C=20000).
    fn pair() -> TaskSet {
        let t1 = Task::accelerated(1, 1, 100_000, InstructionTrace::uniform(10_000, 1000).unwrap());
        let t2 = Task::accelerated(2, 2, 100_000, InstructionTrace::uniform(20_000, 3000).unwrap());
        TaskSet::new(vec![t1, t2]).unwrap()
    }

    #[test]
    fn two_task_pair() {
        let g = pair();
        let s = sys();
        assert_eq!(b_lo(2, &g, &s).unwrap(), 5000);
        assert_eq!(response_lo(2, &g, &s).unwrap(), Response::Bounded(39_800));
        assert_eq!(pb_lo(1, &g, &s).unwrap(), 8000);
        assert_eq!(response_lo(1, &g, &s).unwrap(), Response::Bounded(20_500));
        assert!(analyze(&g, &s).unwrap().schedulable);
    }

    #[test]
    fn single_task_without_overheads() {
        let g = TaskSet::new(vec![Task::cpu_only(1, 1, 100_000, 10_000)]).unwrap();
        assert_eq!(
            response_lo(1, &g, &SystemParams::zero_overhead(5000)).unwrap(),
            Response::Bounded(15_000)
        );
    }

    #[test]
    fn overloaded_task_is_unschedulable() {
        let g = TaskSet::new(vec![Task::cpu_only(1, 1, 100, 99)]).unwrap();
        let r = analyze(&g, &SystemParams::zero_overhead(5000)).unwrap();
        assert!(!r.schedulable);
        assert!(r.diverged.contains(&1));
        assert_eq!(r.tasks[0].r_lo, Response::Unschedulable);
    }

    #[test]
    fn hi_terms_require_hi_task() {
        let g = pair();
        assert!(matches!(pb_hi(1, &g, &sys()), Err(Error::NotHiTask(1))));
        assert!(matches!(response_star(2, &g, &sys(), Response::Bounded(1)), Err(Error::NotHiTask(2))));
    }

    #[test]
    fn unschedulable_lo_propagates_to_transition() {
        let t = Task::cpu_only(1, 1, 100_000, 10_000).hi(20_000);
        let g = TaskSet::new(vec![t]).unwrap();
        assert_eq!(response_star(1, &g, &sys(), Response::Unschedulable).unwrap(), Response::Unschedulable);
    }

    #[test]
    fn empty_set_is_schedulable() {
        let r = analyze(&TaskSet::empty(), &sys()).unwrap();
        assert!(r.schedulable && r.tasks.is_empty());
    }
}
