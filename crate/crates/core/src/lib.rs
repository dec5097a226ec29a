//! Mixed-criticality scheduling for a CPU paired with a streaming DNN accelerator
//! that can be preempted at instruction boundaries.
//!
//! The crate bundles four pieces that share one task model:
//!
//! * [`analysis`]: worst-case response times for LO-mode, HI-mode and the mode
//!   transition, with priority-inversion and criticality-inversion blocking terms.
//! * [`sim`]: a deterministic discrete-event simulator of the scheduler, the budget
//!   monitor and accelerator context switching, for three preemption granularities
//!   and two mode-switch policies.
//! * [`accel`]: the behavioural cost model of the accelerator (instruction traces,
//!   config-copy buffer, banked scratchpad with banklocks and the address remapper).
//! * [`generate`] and [`harness`]: random task-set generation and the experiment
//!   sweeps behind the `mesc` command-line tool.
//!
//! All time quantities are integer processor cycles.

pub mod accel;
pub mod analysis;
pub mod banks;
pub mod error;
pub mod generate;
pub mod harness;
pub mod sim;
pub mod task;

pub use error::{Error, Result};

/// Processor cycles.
pub type Cycles = u64;

pub(crate) fn div_ceil(a: u64, b: u64) -> u64 {
    debug_assert!(b > 0);
    a.div_ceil(b)
}
