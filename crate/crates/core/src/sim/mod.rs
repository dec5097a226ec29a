//! Discrete-event simulation of the scheduler, budget monitor and accelerator context
//! switching.
//!
//! The CPU is always in one of three states: idle, executing a job, or busy with
//! scheduler or context-switch overhead. Jobs are released strictly periodically from
//! time zero. Preemption decisions are taken at the periodic scheduler check, after the
//! accelerator reaches an allowed preemption point; a completing job hands over
//! immediately, and an idle CPU reacts to a release after one check.

pub mod clock;
pub mod metrics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accel::cost::{self, data_banks};
use crate::accel::trace::{remaining_to_boundary, InstrKind, Instruction};
use crate::accel::{AcceleratorState, InFlight};
use crate::task::{Criticality, SystemParams, Task, TaskSet};
use crate::{Cycles, Error, Result};

use clock::TickClock;
pub use metrics::{EventKind, JobCounts, LevelCounts, SimMetrics, TraceEvent};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preemption {
    /// Accelerator jobs run to completion once started.
    NonPreemptive,
    /// Accelerator jobs can be preempted at operator boundaries only.
    LimitedPreemption,
    /// Accelerator jobs can be preempted after any instruction.
    #[default]
    InstructionLevel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// LO tasks keep running in HI-mode whenever no HI task is ready.
    #[default]
    Mesc,
    /// LO tasks are dropped on entering the transition and not released until LO-mode.
    Amc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    LoMode,
    Transition,
    HiMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub horizon: Cycles,
    pub seed: u64,
    pub preemption: Preemption,
    pub policy: Policy,
    /// Probability that a HI job needs more than its LO-mode budget.
    pub overrun_prob: f64,
    /// An overrunning HI job needs `overrun_scale · c_lo`, capped at `c_hi`.
    pub overrun_scale: f64,
    /// Operator segments per trace under limited preemption.
    pub limited_segments: usize,
    /// Record every scheduling event.
    pub trace: bool,
    /// Not serialized; configuration files carry it separately.
    #[serde(skip)]
    pub sys: SystemParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 100_000_000,
            seed: 0,
            preemption: Preemption::InstructionLevel,
            policy: Policy::Mesc,
            overrun_prob: 0.002,
            overrun_scale: 1.5,
            limited_segments: 10,
            trace: false,
            sys: SystemParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.overrun_prob) {
            return bad(format!("overrun_prob {} outside [0, 1]", self.overrun_prob));
        }
        if !(self.overrun_scale >= 1.0) {
            return bad(format!("overrun_scale {} below 1", self.overrun_scale));
        }
        if self.limited_segments == 0 {
            return bad("limited_segments must be positive".into());
        }
        self.sys.validate()
    }
}

/// Actual execution demand of one job: HI jobs overrun their LO budget with probability
/// `overrun_prob`. Only HI jobs consume random draws.
pub fn inject_overrun<R: Rng + ?Sized>(task: &Task, cfg: &SimConfig, rng: &mut R) -> Cycles {
    if !task.is_hi() || !rng.gen_bool(cfg.overrun_prob) {
        return task.c_lo;
    }
    let scaled = (cfg.overrun_scale * task.c_lo as f64).round() as Cycles;
    scaled.clamp(task.c_lo, task.c_hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Ready,
    Running,
    /// Released but not allowed to run in the current mode.
    Pending,
    Interrupted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataLocation {
    Dram,
    Scratchpad,
}

/// Task control block of the single active job of a task.
#[derive(Clone, Debug)]
pub struct Tcb {
    pub release: Cycles,
    pub deadline: Cycles,
    pub demand: Cycles,
    pub executed: Cycles,
    pub status: JobStatus,
    pub data_location: DataLocation,
    /// The budget timer has been set, i.e. the job has run before.
    pub started: bool,
    /// Accelerator context (accumulator, configuration, remapping) sits in DRAM.
    pub acc_saved: bool,
    pub saved_config: Vec<Instruction>,
    pub unacked: u32,
    pub released_mode: Mode,
    pub saw_hi_mode: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum InversionKind {
    Priority,
    Criticality,
}

#[derive(Clone, Copy, Debug)]
struct OpenInversion {
    waiter: usize,
    holder: usize,
    kind: InversionKind,
    start: Cycles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum After {
    Decide,
    Restore(Option<usize>),
    Start(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cpu {
    Idle,
    Exec {
        job: usize,
        since: Cycles,
        base: Cycles,
        /// Work position of the next allowed preemption point once a switch is pending.
        stop_at: Option<Cycles>,
    },
    Busy {
        until: Cycles,
        then: After,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Cpu,
    Deadline(usize),
    Release(usize),
    Tick,
}

/// Simulates `gamma` under `cfg` with every task first released at time zero.
pub fn run(gamma: &TaskSet, cfg: &SimConfig) -> Result<SimMetrics> {
    run_with_offsets(gamma, cfg, &vec![0; gamma.len()])
}

/// Like [`run`], with the first release of each task (in priority order) delayed by
/// `offsets`.
pub fn run_with_offsets(gamma: &TaskSet, cfg: &SimConfig, offsets: &[Cycles]) -> Result<SimMetrics> {
    cfg.validate()?;
    gamma.validate_for(&cfg.sys)?;
    if offsets.len() != gamma.len() {
        return Err(Error::InvalidParam(format!("{} offsets for {} tasks", offsets.len(), gamma.len())));
    }
    let mut sim = Simulator::new(gamma, cfg);
    sim.next_release.copy_from_slice(offsets);
    sim.run()?;
    Ok(sim.metrics)
}

struct Simulator<'a> {
    tasks: &'a [Task],
    cfg: &'a SimConfig,
    sys: &'a SystemParams,
    clock: TickClock,
    rng: ChaCha8Rng,
    now: Cycles,
    mode: Mode,
    jobs: Vec<Option<Tcb>>,
    next_release: Vec<Cycles>,
    cpu: Cpu,
    acc: AcceleratorState,
    /// Task whose accelerator context is live on the accelerator.
    owner: Option<usize>,
    /// Job currently holding the processor and accelerator, for inversion accounting.
    holder: Option<usize>,
    /// The holder is being saved out.
    leaving: bool,
    pending_since: Option<Cycles>,
    inversions: Vec<OpenInversion>,
    boundaries: Vec<Vec<Cycles>>,
    metrics: SimMetrics,
}

impl<'a> Simulator<'a> {
    fn new(gamma: &'a TaskSet, cfg: &'a SimConfig) -> Self {
        let tasks = gamma.tasks();
        let boundaries = tasks
            .iter()
            .map(|t| t.trace().map_or_else(Vec::new, |tr| tr.segment_boundaries(cfg.limited_segments)))
            .collect();
        Simulator {
            tasks,
            cfg,
            sys: &cfg.sys,
            clock: TickClock::new(cfg.sys.t_sr, cfg.sys.y_cpu_check),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            now: 0,
            mode: Mode::LoMode,
            jobs: vec![None; tasks.len()],
            next_release: vec![0; tasks.len()],
            cpu: Cpu::Idle,
            acc: AcceleratorState::new(&cfg.sys),
            owner: None,
            holder: None,
            leaving: false,
            pending_since: None,
            inversions: Vec::new(),
            boundaries,
            metrics: SimMetrics {
                horizon: cfg.horizon,
                ..SimMetrics::default()
            },
        }
    }

    fn job(&self, k: usize) -> &Tcb {
        self.jobs[k].as_ref().expect("active job")
    }

    fn job_mut(&mut self, k: usize) -> &mut Tcb {
        self.jobs[k].as_mut().expect("active job")
    }

    fn violation(&self, what: impl Into<String>) -> Error {
        Error::InvariantViolation {
            at: self.now,
            what: what.into(),
        }
    }

    fn log(&mut self, kind: EventKind, task: Option<usize>, duration: Cycles) {
        if self.cfg.trace {
            let task = task.map(|k| self.tasks[k].id);
            self.metrics.events.push(TraceEvent {
                time: self.now,
                kind,
                task,
                duration,
            });
        }
    }

    fn run(&mut self) -> Result<()> {
        while let Some((t, ev)) = self.next_event() {
            if t >= self.cfg.horizon {
                break;
            }
            debug_assert!(t >= self.now);
            self.now = t;
            match ev {
                Event::Cpu => self.cpu_event()?,
                Event::Deadline(k) => self.abort(k)?,
                Event::Release(k) => self.release(k)?,
                Event::Tick => self.scheduler_tick()?,
            }
            self.after_event()?;
        }
        for (k, j) in self.jobs.iter().enumerate() {
            if j.is_some() {
                self.metrics.level_mut(self.tasks[k].level).in_flight += 1;
            }
        }
        if !self.metrics.conserved() {
            return Err(self.violation("released jobs are not conserved"));
        }
        self.metrics.success = self.metrics.misses() == 0;
        Ok(())
    }

    // ---- event selection -------------------------------------------------------------

    fn exec_event_time(&self) -> Option<Cycles> {
        let Cpu::Exec {
            job,
            since,
            base,
            stop_at,
        } = self.cpu
        else {
            return None;
        };
        let tcb = self.job(job);
        let mut t = self.clock.finish_at(since, tcb.demand - base);
        if let Some(b) = self.budget_point(job) {
            t = t.min(self.clock.finish_at(since, b - base));
        }
        if let Some(s) = stop_at {
            t = t.min(self.clock.finish_at(since, s - base));
        }
        Some(t)
    }

    /// Work position at which the LO-mode budget of a HI job runs out, if it will.
    fn budget_point(&self, k: usize) -> Option<Cycles> {
        let t = &self.tasks[k];
        let tcb = self.job(k);
        (self.mode == Mode::LoMode && t.is_hi() && tcb.demand > t.c_lo && tcb.executed < t.c_lo).then_some(t.c_lo)
    }

    fn next_event(&self) -> Option<(Cycles, Event)> {
        let mut best: Option<(Cycles, Event)> = None;
        let mut offer = |t: Cycles, e: Event| {
            if best.is_none_or(|b| (t, e) < b) {
                best = Some((t, e));
            }
        };
        match self.cpu {
            Cpu::Exec { .. } => offer(self.exec_event_time().unwrap(), Event::Cpu),
            Cpu::Busy { until, .. } => offer(until, Event::Cpu),
            Cpu::Idle => {}
        }
        for (k, j) in self.jobs.iter().enumerate() {
            if let Some(j) = j {
                offer(j.deadline, Event::Deadline(k));
            }
        }
        for (k, &r) in self.next_release.iter().enumerate() {
            offer(r, Event::Release(k));
        }
        if let (Some(since), Cpu::Exec { stop_at: None, .. }) = (self.pending_since, self.cpu) {
            let mut t = self.clock.check_done_after(since);
            if t < self.now {
                t = self.clock.check_done_after(self.now);
            }
            offer(t, Event::Tick);
        }
        best
    }

    // ---- eligibility -----------------------------------------------------------------

    fn is_resident(&self, k: usize) -> bool {
        self.acc.scratchpad.is_resident(self.tasks[k].id)
    }

    fn running_job(&self) -> Option<usize> {
        match self.cpu {
            Cpu::Exec { job, .. } => Some(job),
            _ => None,
        }
    }

    /// Ordering key of an active job in the current mode; `None` when it may not run.
    fn rank(&self, k: usize) -> Option<(u8, u32)> {
        let t = &self.tasks[k];
        let class = match (self.mode, t.level) {
            (Mode::LoMode, _) => 0,
            (_, Criticality::Hi) => 0,
            (Mode::Transition, Criticality::Lo) => {
                if self.is_resident(k) || self.running_job() == Some(k) {
                    1
                } else {
                    return None;
                }
            }
            (Mode::HiMode, Criticality::Lo) => 1,
        };
        Some((class, t.priority))
    }

    fn pick(&self) -> Option<usize> {
        (0..self.jobs.len())
            .filter(|&k| self.jobs[k].is_some())
            .filter_map(|k| self.rank(k).map(|r| (r, k)))
            .min()
            .map(|(_, k)| k)
    }

    fn outranks(&self, a: usize, b: usize) -> bool {
        match (self.rank(a), self.rank(b)) {
            (Some(x), Some(y)) => x < y,
            (Some(_), None) => true,
            _ => false,
        }
    }

    fn preemptible(&self, k: usize) -> bool {
        !(self.cfg.preemption == Preemption::NonPreemptive && self.tasks[k].uses_accelerator())
    }

    // ---- inversions ------------------------------------------------------------------

    /// Opens an inversion for every waiting job that should be running instead of the
    /// accelerator holder.
    fn record_inversions(&mut self) {
        let holder = self.holder;
        let stale: Vec<bool> =
            self.inversions.iter().map(|i| Some(i.holder) != holder || !self.outranks(i.waiter, i.holder)).collect();
        let mut k = 0;
        self.close_inversions(|_| {
            k += 1;
            stale[k - 1]
        });
        let Some(h) = holder else { return };
        if self.leaving || !self.tasks[h].uses_accelerator() {
            return;
        }
        for w in 0..self.jobs.len() {
            if w == h || self.jobs[w].is_none() || self.inversions.iter().any(|i| i.waiter == w) {
                continue;
            }
            if !self.outranks(w, h) {
                continue;
            }
            let (tw, th) = (&self.tasks[w], &self.tasks[h]);
            let kind = if self.mode != Mode::LoMode && tw.is_hi() && !th.is_hi() {
                InversionKind::Criticality
            } else if tw.priority < th.priority {
                InversionKind::Priority
            } else {
                continue;
            };
            self.inversions.push(OpenInversion {
                waiter: w,
                holder: h,
                kind,
                start: self.now,
            });
        }
    }

    fn close_inversions(&mut self, mut pred: impl FnMut(&OpenInversion) -> bool) {
        let now = self.now;
        let mut keep = Vec::with_capacity(self.inversions.len());
        for inv in self.inversions.drain(..) {
            if pred(&inv) {
                let d = now - inv.start;
                match inv.kind {
                    InversionKind::Priority => self.metrics.pi_inversions.push(d),
                    InversionKind::Criticality => self.metrics.ci_inversions.push(d),
                }
            } else {
                keep.push(inv);
            }
        }
        self.inversions = keep;
    }

    // ---- releases, deadlines, completion ---------------------------------------------

    fn release(&mut self, k: usize) -> Result<()> {
        let task = &self.tasks[k];
        self.next_release[k] += task.period;
        if self.jobs[k].is_some() {
            return Err(self.violation(format!("task {} released with a job still active", task.id)));
        }
        let mode = self.mode;
        let level = task.level;
        self.metrics.level_mut(level).by_mode(mode).released += 1;
        if level == Criticality::Lo && mode != Mode::LoMode {
            self.metrics.lo_released_in_hi += 1;
        }
        if self.cfg.policy == Policy::Amc && level == Criticality::Lo && mode != Mode::LoMode {
            self.metrics.level_mut(level).by_mode(mode).dropped += 1;
            self.log(EventKind::Drop, Some(k), 0);
            return Ok(());
        }
        let demand = inject_overrun(task, self.cfg, &mut self.rng);
        self.jobs[k] = Some(Tcb {
            release: self.now,
            deadline: self.now + task.deadline,
            demand,
            executed: 0,
            status: JobStatus::Ready,
            data_location: DataLocation::Dram,
            started: false,
            acc_saved: false,
            saved_config: Vec::new(),
            unacked: 0,
            released_mode: mode,
            saw_hi_mode: mode != Mode::LoMode,
        });
        self.log(EventKind::Release, Some(k), demand);
        Ok(())
    }

    /// Removes a job from the system and frees everything it holds.
    fn retire(&mut self, k: usize) -> Tcb {
        let tcb = self.jobs[k].take().expect("active job");
        self.acc.scratchpad.release_banks(self.tasks[k].id);
        if self.owner == Some(k) {
            self.owner = None;
            self.acc.config_buffer.clear();
            self.acc.unfreeze();
        }
        self.close_inversions(|i| i.holder == k || i.waiter == k);
        if self.holder == Some(k) {
            self.holder = None;
            self.leaving = false;
        }
        tcb
    }

    fn abort(&mut self, k: usize) -> Result<()> {
        let was_running = self.running_job() == Some(k);
        if was_running {
            self.stop_exec();
        }
        let tcb = self.retire(k);
        let task = &self.tasks[k];
        self.metrics.level_mut(task.level).by_mode(tcb.released_mode).missed += 1;
        if task.is_hi() || !tcb.saw_hi_mode {
            self.metrics.guaranteed_misses += 1;
        }
        self.log(EventKind::Miss, Some(k), tcb.executed);
        if was_running {
            self.dispatch()?;
        }
        Ok(())
    }

    /// Drops every LO job; used by the AMC policy on a mode switch.
    fn drop_lo_jobs(&mut self) -> Result<()> {
        let mut dispatch = false;
        for k in 0..self.jobs.len() {
            if self.jobs[k].is_none() || self.tasks[k].is_hi() {
                continue;
            }
            if self.running_job() == Some(k) {
                self.stop_exec();
                dispatch = true;
            }
            let tcb = self.retire(k);
            self.metrics.lo.by_mode(tcb.released_mode).dropped += 1;
            self.log(EventKind::Drop, Some(k), tcb.executed);
        }
        if dispatch {
            self.dispatch()?;
        }
        Ok(())
    }

    fn complete(&mut self, k: usize) -> Result<()> {
        let tcb = self.retire(k);
        let task = &self.tasks[k];
        self.metrics.level_mut(task.level).by_mode(tcb.released_mode).completed += 1;
        if task.level == Criticality::Lo && tcb.released_mode != Mode::LoMode {
            self.metrics.lo_completed_in_hi += 1;
        }
        self.log(EventKind::Complete, Some(k), self.now - tcb.release);
        self.dispatch()
    }

    // ---- execution -------------------------------------------------------------------

    /// Freezes the running job's progress into its TCB and leaves the CPU idle.
    fn stop_exec(&mut self) -> Option<usize> {
        let Cpu::Exec { job, since, base, .. } = self.cpu else {
            return None;
        };
        let done = base + self.clock.work_in(since, self.now);
        let tcb = self.job_mut(job);
        tcb.executed = done;
        self.cpu = Cpu::Idle;
        Some(job)
    }

    fn cpu_event(&mut self) -> Result<()> {
        match self.cpu {
            Cpu::Idle => Ok(()),
            Cpu::Busy { then, .. } => {
                self.cpu = Cpu::Idle;
                match then {
                    After::Decide => {
                        if let Some(p) = self.pick() {
                            self.context_switch(None, Some(p))?;
                        }
                        Ok(())
                    }
                    After::Restore(next) => self.restore_phase(next),
                    After::Start(next) => self.start(next),
                }
            }
            Cpu::Exec { job, stop_at, .. } => {
                let job = self.stop_exec().unwrap_or(job);
                let (executed, demand) = (self.job(job).executed, self.job(job).demand);
                if executed > demand {
                    return Err(self.violation("job executed past its demand"));
                }
                if executed == demand {
                    return self.complete(job);
                }
                let task = &self.tasks[job];
                if self.mode == Mode::LoMode && task.is_hi() && executed == task.c_lo && demand > task.c_lo {
                    self.log(EventKind::Overrun, Some(job), executed);
                    self.resume(job, stop_at);
                    return self.mode_switch();
                }
                if stop_at == Some(executed) {
                    // Preemption point reached; the switch goes to whoever is best now.
                    let next = self.pick();
                    if next == Some(job) {
                        self.resume(job, None);
                        return Ok(());
                    }
                    return self.context_switch(Some(job), next);
                }
                self.resume(job, stop_at);
                Ok(())
            }
        }
    }

    fn resume(&mut self, job: usize, stop_at: Option<Cycles>) {
        let base = self.job(job).executed;
        self.cpu = Cpu::Exec {
            job,
            since: self.now,
            base,
            stop_at,
        };
    }

    /// Periodic check with a switch decision pending: preempt the running job at its next
    /// allowed point if someone else should run.
    fn scheduler_tick(&mut self) -> Result<()> {
        self.pending_since = None;
        let Cpu::Exec {
            job,
            since,
            base,
            stop_at: None,
        } = self.cpu
        else {
            return Ok(());
        };
        let pick = self.pick();
        if pick == Some(job) || pick.is_none() || !self.preemptible(job) {
            return Ok(());
        }
        let executed = base + self.clock.work_in(since, self.now);
        let drain = self.drain(job, executed);
        self.log(EventKind::Preempt, Some(job), drain);
        if drain == 0 {
            self.stop_exec();
            let next = self.pick();
            return self.context_switch(Some(job), next);
        }
        self.cpu = Cpu::Exec {
            job,
            since,
            base,
            stop_at: Some(executed + drain),
        };
        Ok(())
    }

    /// Cycles until the running job reaches a point where it may be switched out.
    fn drain(&mut self, k: usize, executed: Cycles) -> Cycles {
        let Some(trace) = self.tasks[k].trace() else {
            return 0;
        };
        match self.cfg.preemption {
            Preemption::NonPreemptive => self.job(k).demand - executed,
            Preemption::LimitedPreemption => remaining_to_boundary(&self.boundaries[k], executed),
            Preemption::InstructionLevel => {
                let (instr, done) = trace.locate(executed);
                if done == 0 {
                    return 0;
                }
                self.acc.in_flight = Some(InFlight {
                    instruction: *instr,
                    done,
                });
                let d = self.acc.freeze_and_drain();
                self.acc.in_flight = None;
                d
            }
        }
    }

    /// Hands the CPU to the best eligible job after the running one left.
    fn dispatch(&mut self) -> Result<()> {
        self.cpu = Cpu::Idle;
        let next = self.pick();
        self.context_switch(None, next)
    }

    // ---- context switch ----------------------------------------------------------------

    fn evict(&mut self, k: usize) -> Cycles {
        let banks = self.acc.scratchpad.release_banks(self.tasks[k].id);
        if let Some(j) = self.jobs[k].as_mut() {
            j.data_location = DataLocation::Dram;
        }
        banks as Cycles * cost::per_bank(self.sys)
    }

    /// Saves the outgoing job and prepares the accelerator for `to`, then continues with
    /// the restore phase once the save overhead has elapsed.
    fn context_switch(&mut self, from: Option<usize>, to: Option<usize>) -> Result<()> {
        let sys = self.sys;
        let mut cycles = 0;
        let mut acc_work = false;
        if let Some(c) = from {
            cycles += sys.y_cpu_switch;
            let executed = self.job(c).executed;
            let unacked = self.tasks[c]
                .trace()
                .map_or(0, |tr| (tr.instructions_after(executed) as u32).min(sys.cost.queue_depth));
            let tcb = self.job_mut(c);
            tcb.status = JobStatus::Interrupted;
            tcb.unacked = unacked;
            self.leaving = true;
        }
        if let Some(n) = to.filter(|&n| self.tasks[n].uses_accelerator()) {
            let next_task = &self.tasks[n];
            if let Some(o) = self.owner.filter(|&o| o != n) {
                let sc = cost::save_cost(&self.acc.scratchpad, self.tasks[o].id, Some(next_task), sys);
                if sc.evicted_banks > 0 {
                    self.evict(o);
                }
                let saved = self.acc.config_buffer.replay();
                self.acc.config_buffer.clear();
                self.acc.queue.clear();
                self.acc.unfreeze();
                let tcb = self.job_mut(o);
                tcb.acc_saved = true;
                tcb.saved_config = saved;
                self.owner = None;
                cycles += sc.cycles;
                acc_work = true;
            }
            let lo_next = !next_task.is_hi();
            if self.mode == Mode::HiMode && lo_next {
                // At most one LO task may keep data in the scratchpad in HI-mode.
                for r in 0..self.jobs.len() {
                    if r != n && self.jobs[r].is_some() && !self.tasks[r].is_hi() && self.is_resident(r) {
                        cycles += self.evict(r);
                        acc_work = true;
                    }
                }
            }
            let need = data_banks(next_task, sys).saturating_sub(self.acc.scratchpad.locked_by(next_task.id));
            while self.acc.scratchpad.free_banks() < need {
                let victim = (0..self.jobs.len())
                    .filter(|&r| r != n && self.jobs[r].is_some() && self.is_resident(r))
                    .max_by_key(|&r| self.tasks[r].priority)
                    .ok_or_else(|| self.violation("scratchpad full with no evictable task"))?;
                cycles += self.evict(victim);
                acc_work = true;
            }
        }
        if acc_work {
            self.metrics.save_cycles.push(cycles);
        }
        if from.is_some() || cycles > 0 {
            self.log(EventKind::Save, from, cycles);
        }
        if cycles > 0 {
            self.cpu = Cpu::Busy {
                until: self.now + cycles,
                then: After::Restore(to),
            };
            Ok(())
        } else {
            self.restore_phase(to)
        }
    }

    fn restore_phase(&mut self, to: Option<usize>) -> Result<()> {
        let old = self.holder.take();
        if let Some(h) = old {
            self.close_inversions(|i| i.holder == h);
        }
        self.leaving = false;
        let Some(n) = to else {
            self.cpu = Cpu::Idle;
            return Ok(());
        };
        if self.jobs[n].is_none() {
            return self.dispatch();
        }
        self.holder = Some(n);

        let sys = self.sys;
        let task = &self.tasks[n];
        let mut cycles = 0;
        if !self.job(n).started {
            if let Some(trace) = task.trace() {
                self.acc.config_buffer.clear();
                for i in trace.instructions().iter().filter(|i| i.kind == InstrKind::Config) {
                    self.acc.config_buffer.record(i);
                }
                self.stage_data(n)?;
                self.owner = Some(n);
            }
            self.job_mut(n).started = true;
        } else {
            cycles += sys.y_cpu_switch;
            if task.uses_accelerator() && self.owner != Some(n) {
                if let Some(o) = self.owner {
                    return Err(self.violation(format!("task {} still owns the accelerator", self.tasks[o].id)));
                }
                let rc = cost::restore_cost(&self.acc.scratchpad, task, self.job(n).unacked, sys);
                self.stage_data(n)?;
                let saved = std::mem::take(&mut self.job_mut(n).saved_config);
                for i in &saved {
                    self.acc.config_buffer.record(i);
                }
                if self.acc.config_buffer.replay() != saved {
                    return Err(self.violation("config-copy buffer replay differs from the saved configuration"));
                }
                self.job_mut(n).acc_saved = false;
                self.owner = Some(n);
                cycles += rc;
                self.metrics.restore_cycles.push(cycles);
            }
        }
        if self.owner == Some(n) {
            self.acc.unfreeze();
        }
        self.job_mut(n).status = JobStatus::Running;
        self.log(EventKind::Restore, Some(n), cycles);
        if cycles > 0 {
            self.cpu = Cpu::Busy {
                until: self.now + cycles,
                then: After::Start(n),
            };
            Ok(())
        } else {
            self.start(n)
        }
    }

    /// Locks the task's banks and writes its data through the remapper if it is not resident.
    fn stage_data(&mut self, k: usize) -> Result<()> {
        let t = &self.tasks[k];
        if t.footprint_bytes > 0 && !self.acc.scratchpad.is_resident(t.id) {
            self.acc.scratchpad.remap_write(t.id, t.banks, 0, t.footprint_bytes)?;
        }
        if let Some(j) = self.jobs[k].as_mut() {
            if t.footprint_bytes > 0 {
                j.data_location = DataLocation::Scratchpad;
            }
        }
        Ok(())
    }

    fn start(&mut self, n: usize) -> Result<()> {
        if self.jobs[n].is_none() {
            return self.dispatch();
        }
        self.log(EventKind::Start, Some(n), self.job(n).executed);
        self.resume(n, None);
        Ok(())
    }

    // ---- modes -------------------------------------------------------------------------

    fn set_mode(&mut self, to: Mode) -> Result<()> {
        let legal = matches!(
            (self.mode, to),
            (Mode::LoMode, Mode::Transition) | (Mode::Transition, Mode::HiMode) | (Mode::HiMode, Mode::LoMode)
        );
        if !legal {
            return Err(self.violation(format!("illegal mode change {:?} -> {:?}", self.mode, to)));
        }
        self.mode = to;
        self.log(EventKind::ModeChange, None, to as Cycles);
        Ok(())
    }

    /// A HI job ran out of its LO-mode budget.
    fn mode_switch(&mut self) -> Result<()> {
        self.set_mode(Mode::Transition)?;
        self.metrics.mode_switches += 1;
        for j in self.jobs.iter_mut().flatten() {
            j.saw_hi_mode = true;
        }
        if self.cfg.policy == Policy::Amc {
            self.drop_lo_jobs()?;
        }
        Ok(())
    }

    fn lo_residents(&self) -> usize {
        (0..self.jobs.len())
            .filter(|&k| self.jobs[k].is_some() && !self.tasks[k].is_hi() && self.is_resident(k))
            .count()
    }

    fn after_event(&mut self) -> Result<()> {
        if self.mode == Mode::Transition && self.lo_residents() <= 1 {
            self.set_mode(Mode::HiMode)?;
            }
        if self.mode == Mode::HiMode && self.cpu == Cpu::Idle && self.jobs.iter().all(Option::is_none) {
            self.set_mode(Mode::LoMode)?;
        }
        if self.cpu == Cpu::Idle && self.pick().is_some() {
            let c = self.sys.y_cpu_check;
            if c == 0 {
                let p = self.pick();
                self.context_switch(None, p)?;
            } else {
                self.cpu = Cpu::Busy {
                    until: self.now + c,
                    then: After::Decide,
                };
            }
        }
        self.update_pending();
        self.record_inversions();
        self.check_invariants()
    }

    fn update_pending(&mut self) {
        let wants_switch = match self.cpu {
            Cpu::Exec {
                job, stop_at: None, ..
            } => self.preemptible(job) && self.pick() != Some(job),
            _ => false,
        };
        if !wants_switch {
            self.pending_since = None;
        } else if self.pending_since.is_none() {
            self.pending_since = Some(self.now);
        }
        for k in 0..self.jobs.len() {
            if self.jobs[k].is_none() || self.holder == Some(k) {
                continue;
            }
            let status = match (self.rank(k).is_some(), self.job(k).started) {
                (false, _) => JobStatus::Pending,
                (true, true) => JobStatus::Interrupted,
                (true, false) => JobStatus::Ready,
            };
            self.job_mut(k).status = status;
        }
    }

    fn check_invariants(&self) -> Result<()> {
        if self.mode == Mode::HiMode && self.lo_residents() > 1 {
            return Err(self.violation("more than one LO task resident in HI-mode"));
        }
        let tasks = self.tasks;
        self.acc
            .scratchpad
            .check(|id| tasks.iter().find(|t| t.id == id).map_or(0, |t| t.banks))
            .map_err(|e| self.violation(e))?;
        for t in self.acc.scratchpad.resident_tasks() {
            let k = tasks.iter().position(|x| x.id == t).unwrap();
            if self.jobs[k].is_none() {
                return Err(self.violation(format!("finished task {t} still holds banks")));
            }
        }
        if let Some(o) = self.owner {
            if self.jobs[o].is_none() || !tasks[o].uses_accelerator() {
                return Err(self.violation("accelerator context owned by an inactive job"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
