//! Accelerator instruction traces.
//!
//! Real workloads are replaced by synthetic traces: a handful of configuration
//! instructions, DMA loads and stores that move the task's footprint, and a long
//! run of preload/compute instructions whose cycles fill the rest of the budget.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{div_ceil, Cycles, Error, Result};

/// Configuration instructions execute inside the reservation station.
pub const CONFIG_CYCLES: Cycles = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstrKind {
    Config,
    Load,
    Store,
    Preload,
    Compute,
    Flush,
}

/// The four configuration classes; a newer instruction of a class overrides the older one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfigClass {
    LoadCfg,
    StoreCfg,
    ExecCfg,
    NormCfg,
}

impl ConfigClass {
    pub const ALL: [ConfigClass; 4] = [
        ConfigClass::LoadCfg,
        ConfigClass::StoreCfg,
        ConfigClass::ExecCfg,
        ConfigClass::NormCfg,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub kind: InstrKind,
    pub cycles: Cycles,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_class: Option<ConfigClass>,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl Instruction {
    pub fn config(class: ConfigClass) -> Self {
        Instruction {
            kind: InstrKind::Config,
            cycles: CONFIG_CYCLES,
            bytes: 0,
            config_class: Some(class),
        }
    }

    pub fn load(bytes: u64, profile: &TraceProfile) -> Self {
        Instruction {
            kind: InstrKind::Load,
            cycles: profile.transfer_cycles(bytes),
            bytes,
            config_class: None,
        }
    }

    pub fn store(bytes: u64, profile: &TraceProfile) -> Self {
        Instruction {
            kind: InstrKind::Store,
            cycles: profile.transfer_cycles(bytes),
            bytes,
            config_class: None,
        }
    }

    pub fn compute(cycles: Cycles) -> Self {
        Instruction {
            kind: InstrKind::Compute,
            cycles,
            bytes: 0,
            config_class: None,
        }
    }

    pub fn preload(cycles: Cycles) -> Self {
        Instruction {
            kind: InstrKind::Preload,
            cycles,
            bytes: 0,
            config_class: None,
        }
    }

    pub fn flush(cycles: Cycles) -> Self {
        Instruction {
            kind: InstrKind::Flush,
            cycles,
            bytes: 0,
            config_class: None,
        }
    }

    fn check(&self) -> Result<()> {
        if self.cycles == 0 {
            return Err(Error::TraceInfeasible(format!("{:?} instruction with zero cycles", self.kind)));
        }
        match self.kind {
            InstrKind::Config => {
                if self.cycles != CONFIG_CYCLES || self.config_class.is_none() {
                    return Err(Error::TraceInfeasible(
                        "config instructions take 2 cycles and carry a class".into(),
                    ));
                }
            }
            InstrKind::Load | InstrKind::Store => {}
            _ if self.bytes != 0 => {
                return Err(Error::TraceInfeasible(format!("{:?} instruction cannot move bytes", self.kind)))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Per-instruction cycle envelope used by [`make_trace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceProfile {
    /// Configuration instructions emitted at the head of the trace (cycled over the four classes).
    pub config_count: usize,
    /// DMA beat: the maximum transfer size of one DMA request.
    pub beat_bytes: u64,
    /// Fixed issue cost of every load/store.
    pub transfer_setup: Cycles,
    /// Bytes moved by one load/store instruction.
    pub chunk_bytes: u64,
    /// Fraction of the footprint written back by stores; the rest is loaded.
    pub store_fraction: f64,
    pub compute_min: Cycles,
    pub compute_max: Cycles,
    /// Hard ceiling on any single instruction.
    pub max_instr_bound: Cycles,
}

impl Default for TraceProfile {
    fn default() -> Self {
        TraceProfile {
            config_count: 4,
            beat_bytes: 64,
            transfer_setup: 100,
            chunk_bytes: 4096,
            store_fraction: 0.25,
            compute_min: 500,
            compute_max: 10_000,
            max_instr_bound: 10_000,
        }
    }
}

impl TraceProfile {
    pub fn transfer_cycles(&self, bytes: u64) -> Cycles {
        self.transfer_setup + div_ceil(bytes, self.beat_bytes.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::TraceInfeasible(m.to_string()));
        if self.beat_bytes == 0 || self.chunk_bytes == 0 {
            return bad("beat and chunk sizes must be positive");
        }
        if self.compute_min == 0 || self.compute_min > self.compute_max {
            return bad("compute range must satisfy 0 < min <= max");
        }
        if !(0.0..=1.0).contains(&self.store_fraction) {
            return bad("store fraction must lie in [0, 1]");
        }
        let smallest_feasible = CONFIG_CYCLES
            .max(self.compute_max)
            .max(self.transfer_cycles(self.chunk_bytes));
        if self.max_instr_bound < smallest_feasible {
            return Err(Error::TraceInfeasible(format!(
                "max instruction bound {} is below the profile's largest instruction {}",
                self.max_instr_bound, smallest_feasible
            )));
        }
        Ok(())
    }
}

/// An ordered instruction list with cached prefix sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TraceRecord", into = "TraceRecord")]
pub struct InstructionTrace {
    instructions: Vec<Instruction>,
    /// `ends[i]` is the cycle at which instruction `i` completes.
    ends: Vec<Cycles>,
    max_instr: Cycles,
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    total_cycles: Cycles,
    instructions: Vec<Instruction>,
}

impl TryFrom<TraceRecord> for InstructionTrace {
    type Error = Error;

    fn try_from(rec: TraceRecord) -> Result<Self> {
        let trace = InstructionTrace::new(rec.instructions)?;
        if trace.total_cycles() != rec.total_cycles {
            return Err(Error::TraceInfeasible(format!(
                "declared total {} differs from instruction sum {}",
                rec.total_cycles,
                trace.total_cycles()
            )));
        }
        Ok(trace)
    }
}

impl From<InstructionTrace> for TraceRecord {
    fn from(t: InstructionTrace) -> Self {
        TraceRecord {
            total_cycles: t.total_cycles(),
            instructions: t.instructions,
        }
    }
}

impl InstructionTrace {
    pub fn new(instructions: Vec<Instruction>) -> Result<Self> {
        if instructions.is_empty() {
            return Err(Error::TraceInfeasible("trace has no instructions".into()));
        }
        let mut ends = Vec::with_capacity(instructions.len());
        let mut acc: Cycles = 0;
        let mut max_instr = 0;
        for ins in &instructions {
            ins.check()?;
            acc += ins.cycles;
            max_instr = max_instr.max(ins.cycles);
            ends.push(acc);
        }
        Ok(InstructionTrace {
            instructions,
            ends,
            max_instr,
        })
    }

    /// Compute instructions of `max_instr` cycles, with a shorter tail so the sum is `total`.
    pub fn uniform(total: Cycles, max_instr: Cycles) -> Result<Self> {
        if total == 0 || max_instr == 0 {
            return Err(Error::TraceInfeasible("total and max_instr must be positive".into()));
        }
        let mut v = vec![Instruction::compute(max_instr); (total / max_instr) as usize];
        if !total.is_multiple_of(max_instr) {
            v.push(Instruction::compute(total % max_instr));
        }
        Self::new(v)
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn total_cycles(&self) -> Cycles {
        *self.ends.last().expect("trace is non-empty")
    }

    pub fn max_instr_cycles(&self) -> Cycles {
        self.max_instr
    }

    /// Bytes moved by loads and stores.
    pub fn bytes_touched(&self) -> u64 {
        self.instructions.iter().map(|i| i.bytes).sum()
    }

    /// Completion cycles of each instruction, cumulative from the start of the trace.
    pub fn ends(&self) -> &[Cycles] {
        &self.ends
    }

    /// Index of the instruction executing at offset `pos` within one pass of the trace.
    fn index_at(&self, local: Cycles) -> usize {
        self.ends.partition_point(|&e| e <= local)
    }

    /// Cycles left in the instruction that is in flight after `executed` cycles of work,
    /// or zero when `executed` sits exactly on an instruction boundary.
    ///
    /// Demand beyond one pass (an overrunning job) wraps around the trace.
    pub fn remaining_in_instruction(&self, executed: Cycles) -> Cycles {
        let local = executed % self.total_cycles();
        if local == 0 {
            return 0;
        }
        match self.ends.binary_search(&local) {
            Ok(_) => 0,
            Err(i) => self.ends[i] - local,
        }
    }

    /// The instruction in flight after `executed` cycles of work and the cycles it has
    /// already run. On an instruction boundary this is the next instruction with zero done.
    pub fn locate(&self, executed: Cycles) -> (&Instruction, Cycles) {
        let local = executed % self.total_cycles();
        let i = self.index_at(local);
        let start = if i == 0 { 0 } else { self.ends[i - 1] };
        (&self.instructions[i], local - start)
    }

    /// Instructions not yet started once the in-flight instruction at `executed` retires.
    pub fn instructions_after(&self, executed: Cycles) -> usize {
        let local = executed % self.total_cycles();
        let idx = self.index_at(local);
        let started = if local == 0 || self.ends.binary_search(&local).is_ok() { idx } else { idx + 1 };
        self.len().saturating_sub(started)
    }

    /// Operator-style preemption points: `segments - 1` instruction boundaries placed as
    /// close as possible to evenly spaced cycle offsets. The returned list always ends
    /// with the trace total.
    pub fn segment_boundaries(&self, segments: usize) -> Vec<Cycles> {
        let total = self.total_cycles();
        let segments = segments.max(1) as u64;
        let mut out: Vec<Cycles> = (1..segments)
            .map(|k| {
                let target = total * k / segments;
                let i = self.ends.partition_point(|&e| e < target);
                self.ends[i.min(self.ends.len() - 1)]
            })
            .collect();
        out.push(total);
        out.dedup();
        out
    }
}

/// Cycles until the next entry of `boundaries` (a sorted list ending with the trace total)
/// at or after `executed`, wrapping over trace passes.
pub fn remaining_to_boundary(boundaries: &[Cycles], executed: Cycles) -> Cycles {
    let total = *boundaries.last().expect("boundaries end with the trace total");
    let local = executed % total;
    if local == 0 {
        return 0;
    }
    let i = boundaries.partition_point(|&b| b < local);
    boundaries[i] - local
}

/// Builds a synthetic trace whose instruction cycles sum to `total_cycles` and whose
/// loads and stores move `footprint_bytes` in total.
pub fn make_trace<R: Rng + ?Sized>(
    total_cycles: Cycles,
    footprint_bytes: u64,
    rng: &mut R,
    profile: &TraceProfile,
) -> Result<InstructionTrace> {
    profile.validate()?;
    if total_cycles == 0 {
        return Err(Error::TraceInfeasible("total cycles must be positive".into()));
    }

    let configs: Vec<Instruction> = (0..profile.config_count)
        .map(|i| Instruction::config(ConfigClass::ALL[i % 4]))
        .collect();

    let store_bytes = (footprint_bytes as f64 * profile.store_fraction).floor() as u64;
    let load_bytes = footprint_bytes - store_bytes;
    let chunks = |bytes: u64| {
        let mut v = Vec::new();
        let mut left = bytes;
        while left > 0 {
            let b = left.min(profile.chunk_bytes);
            v.push(b);
            left -= b;
        }
        v
    };
    let loads: Vec<Instruction> = chunks(load_bytes).into_iter().map(|b| Instruction::load(b, profile)).collect();
    let stores: Vec<Instruction> = chunks(store_bytes).into_iter().map(|b| Instruction::store(b, profile)).collect();

    let fixed: Cycles = configs.iter().chain(&loads).chain(&stores).map(|i| i.cycles).sum();
    if fixed > total_cycles {
        return Err(Error::TraceInfeasible(format!(
            "configuration and data movement need {fixed} cycles, budget is {total_cycles}"
        )));
    }

    let mut computes = Vec::new();
    let mut remaining = total_cycles - fixed;
    let (lo, hi) = (profile.compute_min, profile.compute_max);
    while remaining > 0 {
        let c = if remaining <= hi {
            // Take everything if the leftover would fall below the minimum.
            let draw = rng.gen_range(lo..=hi);
            if remaining < draw + lo {
                remaining
            } else {
                draw
            }
        } else {
            let draw = rng.gen_range(lo..=hi);
            if remaining - draw < lo {
                remaining - lo
            } else {
                draw
            }
        };
        let ins = if computes.len() % 2 == 0 { Instruction::preload(c) } else { Instruction::compute(c) };
        computes.push(ins);
        remaining -= c;
    }

    // Loads are spread over the first half of the compute stream, stores over the second.
    let m = computes.len();
    let mut out = configs;
    out.reserve(m + loads.len() + stores.len());
    let mut li = loads.into_iter().peekable();
    let mut si = stores.into_iter().peekable();
    let n_loads = li.len();
    let n_stores = si.len();
    let half = m / 2;
    let mut placed_loads = 0usize;
    let mut placed_stores = 0usize;
    for (i, c) in computes.into_iter().enumerate() {
        while li.peek().is_some() && (half == 0 || placed_loads * half <= i * n_loads) {
            out.push(li.next().unwrap());
            placed_loads += 1;
        }
        out.push(c);
        if i >= half {
            let span = m - half;
            while si.peek().is_some() && placed_stores * span <= (i - half) * n_stores {
                out.push(si.next().unwrap());
                placed_stores += 1;
            }
        }
    }
    out.extend(li);
    out.extend(si);
    InstructionTrace::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_cycle_budget_is_a_single_config() {
        let profile = TraceProfile {
            config_count: 1,
            ..TraceProfile::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = make_trace(2, 0, &mut rng, &profile).unwrap();
        assert_eq!(t.instructions(), &[Instruction::config(ConfigClass::LoadCfg)]);
    }

    #[test]
    fn sum_matches_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = make_trace(1_000_000, 20_000, &mut rng, &TraceProfile::default()).unwrap();
        assert_eq!(t.total_cycles(), 1_000_000);
        assert_eq!(t.instructions().iter().map(|i| i.cycles).sum::<u64>(), 1_000_000);
        assert_eq!(t.bytes_touched(), 20_000);
    }

    #[test]
    fn default_profile_caps_instruction_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = make_trace(10_000_000, 64 * 1024, &mut rng, &TraceProfile::default()).unwrap();
        let scanned = t.instructions().iter().map(|i| i.cycles).max().unwrap();
        assert!(scanned <= 10_000);
        assert_eq!(scanned, t.max_instr_cycles());
    }

    #[test]
    fn infeasible_profile_is_rejected() {
        let profile = TraceProfile {
            max_instr_bound: 1_000,
            ..TraceProfile::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            make_trace(100_000, 0, &mut rng, &profile),
            Err(Error::TraceInfeasible(_))
        ));
        // Budget too small for the data movement.
        assert!(make_trace(50, 1 << 20, &mut rng, &TraceProfile::default()).is_err());
    }

    #[test]
    fn in_flight_remainder_uses_linear_progress() {
        let t = InstructionTrace::new(vec![Instruction::compute(1000), Instruction::compute(500)]).unwrap();
        assert_eq!(t.remaining_in_instruction(0), 0);
        assert_eq!(t.remaining_in_instruction(400), 600);
        assert_eq!(t.remaining_in_instruction(1000), 0);
        assert_eq!(t.remaining_in_instruction(1100), 400);
        // Second pass of an overrunning job.
        assert_eq!(t.remaining_in_instruction(1500 + 400), 600);
        assert_eq!(t.locate(400), (&Instruction::compute(1000), 400));
        assert_eq!(t.locate(1000), (&Instruction::compute(500), 0));
        assert_eq!(t.locate(1500), (&Instruction::compute(1000), 0));
        assert_eq!(t.instructions_after(400), 1);
        assert_eq!(t.instructions_after(1000), 1);
        assert_eq!(t.instructions_after(1200), 0);
    }

    #[test]
    fn segment_boundaries_land_on_instructions() {
        let t = InstructionTrace::uniform(100_000, 3_000).unwrap();
        let b = t.segment_boundaries(10);
        assert_eq!(*b.last().unwrap(), 100_000);
        assert!(b.iter().all(|x| t.ends().binary_search(x).is_ok()));
        assert_eq!(b.len(), 10);
        assert_eq!(remaining_to_boundary(&b, 1), b[0] - 1);
        assert_eq!(remaining_to_boundary(&b, b[0]), 0);
    }

    #[test]
    fn trace_json_round_trip_checks_total() {
        let t = InstructionTrace::uniform(10_000, 3_000).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: InstructionTrace = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let tampered = s.replace("\"total_cycles\":10000", "\"total_cycles\":9999");
        assert!(serde_json::from_str::<InstructionTrace>(&tampered).is_err());
    }
}
