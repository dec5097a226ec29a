use crate::task::TaskId;
use crate::Cycles;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),

    #[error("task {id} is invalid: {reason}")]
    InvalidTask { id: TaskId, reason: String },

    #[error("invalid task set: {0}")]
    InvalidTaskSet(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("task {0} is not a HI-criticality task")]
    NotHiTask(TaskId),

    #[error("cannot build instruction trace: {0}")]
    TraceInfeasible(String),

    #[error("task {task} would exceed its allocation of {allowed} scratchpad bank(s)")]
    AllocationExceeded { task: TaskId, allowed: u32 },

    #[error("task {task} needs {needed} more bank(s) but none are free")]
    BanksUnavailable { task: TaskId, needed: u32 },

    #[error("remapping block is full ({capacity} entries)")]
    CapacityExceeded { capacity: usize },

    #[error("no remapping for task {task} at address {addr:#x}")]
    TranslationFault { task: TaskId, addr: u64 },

    #[error("execution profile is empty")]
    EmptyProfile,

    #[error("task-set generation failed: {0}")]
    Generation(String),

    #[error("simulation invariant violated at cycle {at}: {what}")]
    InvariantViolation { at: Cycles, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
