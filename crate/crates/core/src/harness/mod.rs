//! File-level front end: configuration documents, task-set files and the commands behind
//! the `mesc` binary.

pub mod experiment;
pub mod plot;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalysisResult, Response};
use crate::generate::{generate, GenParams};
use crate::sim::{self, SimConfig, SimMetrics};
use crate::task::{SystemParams, TaskSet};
use crate::{Cycles, Error, Result};

pub use experiment::{cmd_experiment, ExperimentSpec, SweepRow};

pub const TASKSET_SCHEMA: &str = "mesc-taskset/1";
pub const ANALYSIS_SCHEMA: &str = "mesc-analysis/1";
pub const METRICS_SCHEMA: &str = "mesc-metrics/1";
pub const TRACE_SCHEMA: &str = "mesc-trace/1";

/// Everything a command can be configured with; every section is optional in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub system: SystemParams,
    pub gen: GenParams,
    pub sim: SimConfig,
    /// When non-zero, a simulation runs for this many times the longest period instead
    /// of `sim.horizon`.
    pub horizon_periods: u64,
    /// Task sets written by `gen`.
    pub count: usize,
    pub experiment: ExperimentSpec,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            system: SystemParams::default(),
            gen: GenParams::default(),
            sim: SimConfig::default(),
            horizon_periods: 20,
            count: 1,
            experiment: ExperimentSpec::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Config = serde_json::from_reader(File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.gen.validate()?;
        self.sim_config_for(&TaskSet::empty()).validate()?;
        self.experiment.validate()
    }

    /// The simulation configuration for one task set, with the horizon resolved.
    pub fn sim_config_for(&self, gamma: &TaskSet) -> SimConfig {
        let mut c = self.sim.clone();
        c.sys = self.system.clone();
        if self.horizon_periods > 0 && !gamma.is_empty() {
            c.horizon = gamma.max_period().saturating_mul(self.horizon_periods);
        }
        c
    }
}

/// Seed of the `index`-th derived item of a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// On-disk task set with the seed that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSetDoc {
    pub schema: String,
    pub seed: Option<u64>,
    pub tasks: TaskSet,
}

impl TaskSetDoc {
    pub fn new(tasks: TaskSet, seed: Option<u64>) -> Self {
        TaskSetDoc {
            schema: TASKSET_SCHEMA.to_string(),
            seed,
            tasks,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: TaskSetDoc = serde_json::from_reader(File::open(path)?)?;
        if doc.schema != TASKSET_SCHEMA {
            return Err(Error::InvalidParam(format!("unsupported task-set schema {:?}", doc.schema)));
        }
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(w.flush()?)
    }
}

/// Generates `cfg.count` task sets into `out_dir`, named `taskset_0000.json` onwards.
/// Set `i` uses `derive_seed(master, i)`.
pub fn cmd_gen(cfg: &Config, master: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.gen.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let seed = derive_seed(master, i as u64);
        let params = GenParams { seed, ..cfg.gen.clone() };
        let gamma = generate(&params, &cfg.system)?;
        let path = out_dir.join(format!("taskset_{i:04}.json"));
        TaskSetDoc::new(gamma, Some(seed)).save(&path)?;
        written.push(path);
    }
    Ok(written)
}

fn cell(r: Response) -> String {
    match r {
        Response::Bounded(v) => v.to_string(),
        Response::Unschedulable => "unbounded".into(),
    }
}

/// Writes one analysis row per task, preceded by a `# schema` line.
pub fn write_analysis_csv<W: Write>(result: &AnalysisResult, mut out: W) -> Result<()> {
    writeln!(out, "# schema: {ANALYSIS_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id", "level", "deadline", "pb_lo", "b_lo", "r_lo", "pb_hi", "cb_hi", "b_hi", "r_hi", "r_star", "verdict",
    ])?;
    for t in &result.tasks {
        let (pb_hi, cb_hi, b_hi, r_hi, r_star) = match &t.hi {
            Some(h) => (h.pb_hi.to_string(), h.cb_hi.to_string(), h.b_hi.to_string(), cell(h.r_hi), cell(h.r_star)),
            None => Default::default(),
        };
        let verdict = if t.schedulable() { "schedulable" } else { "unschedulable" };
        w.write_record([
            t.id.to_string(),
            t.level.to_string(),
            t.deadline.to_string(),
            t.pb_lo.to_string(),
            t.b_lo.to_string(),
            cell(t.r_lo),
            pb_hi,
            cb_hi,
            b_hi,
            r_hi,
            r_star,
            verdict.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_analyze<W: Write>(cfg: &Config, taskset: &Path, out: W) -> Result<AnalysisResult> {
    let doc = TaskSetDoc::load(taskset)?;
    doc.tasks.validate_for(&cfg.system)?;
    let result = analyze(&doc.tasks, &cfg.system)?;
    write_analysis_csv(&result, out)?;
    Ok(result)
}

#[derive(Clone, Debug, Serialize)]
pub struct SimReport<'a> {
    pub schema: &'static str,
    pub taskset_seed: Option<u64>,
    pub system: &'a SystemParams,
    pub config: &'a SimConfig,
    pub metrics: &'a SimMetrics,
}

pub fn write_trace_csv<W: Write>(metrics: &SimMetrics, mut out: W) -> Result<()> {
    writeln!(out, "# schema: {TRACE_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "event", "task", "duration"])?;
    for e in &metrics.events {
        let kind = serde_json::to_value(e.kind)?;
        w.write_record([
            e.time.to_string(),
            kind.as_str().unwrap_or_default().to_string(),
            e.task.map(|t| t.to_string()).unwrap_or_default(),
            e.duration.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Simulates one task-set file; writes the metrics JSON to `out` and, when `trace` is given,
/// the event trace CSV there.
pub fn cmd_sim<W: Write>(cfg: &Config, taskset: &Path, out: W, trace: Option<&Path>) -> Result<SimMetrics> {
    let doc = TaskSetDoc::load(taskset)?;
    let mut sc = cfg.sim_config_for(&doc.tasks);
    sc.trace = sc.trace || trace.is_some();
    let mut metrics = sim::run(&doc.tasks, &sc)?;
    if let Some(p) = trace {
        write_trace_csv(&metrics, BufWriter::new(File::create(p)?))?;
    }
    let events = std::mem::take(&mut metrics.events);
    let report = SimReport {
        schema: METRICS_SCHEMA,
        taskset_seed: doc.seed,
        system: &cfg.system,
        config: &sc,
        metrics: &metrics,
    };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    metrics.events = events;
    Ok(metrics)
}

/// Horizon covering `periods` of the longest task, capped at `cap`.
pub fn bounded_horizon(gamma: &TaskSet, periods: u64, cap: Cycles) -> Cycles {
    gamma.max_period().saturating_mul(periods).min(cap).max(1)
}
