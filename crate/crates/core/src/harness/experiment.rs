//! Multi-set sweeps: successful ratio, LO survivability, inversion lengths and switch
//! overheads over a grid of generation or system parameters.
//!
//! Set `s` of every point is generated from `derive_seed(master, s)`, so all points and
//! variants of a sweep see the same random draws. Runs execute in parallel and are reduced
//! in (point, set) order, which makes every CSV a function of the config and master seed.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, plot, Config};
use crate::generate::{generate, GenParams};
use crate::sim::{self, Mode, Policy, Preemption, SimConfig, SimMetrics};
use crate::task::{SystemParams, TaskSet};
use crate::{Cycles, Error, Result};

pub const SWEEP_SCHEMA: &str = "mesc-sweep/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub policy: Policy,
    pub preemption: Preemption,
}

impl Variant {
    pub const fn new(policy: Policy, preemption: Preemption) -> Self {
        Variant { policy, preemption }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Utilization,
    Gamma,
    Beta,
    Inversion,
    Overhead,
}

impl Sweep {
    pub const ALL: [Sweep; 5] = [Sweep::Utilization, Sweep::Gamma, Sweep::Beta, Sweep::Inversion, Sweep::Overhead];

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Utilization => "utilization",
            Sweep::Gamma => "gamma",
            Sweep::Beta => "beta",
            Sweep::Inversion => "inversion",
            Sweep::Overhead => "overhead",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub util_grid: Vec<f64>,
    pub sets_per_point: usize,
    pub gamma_grid: Vec<f64>,
    pub beta_grid: Vec<usize>,
    /// Utilization of the γ, β, inversion and overhead sweeps.
    pub fixed_util: f64,
    /// Policy and preemption pairs compared along the utilization axis.
    pub variants: Vec<Variant>,
    /// Variant used by the γ, β and overhead sweeps.
    pub axis_variant: Variant,
    /// Upper bound on any simulation horizon.
    pub horizon_cap: Cycles,
    pub sweeps: Vec<Sweep>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            util_grid: vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
            sets_per_point: 100,
            gamma_grid: vec![0.2, 0.4, 0.6, 0.8],
            beta_grid: vec![5, 10, 20],
            fixed_util: 0.7,
            variants: vec![
                Variant::new(Policy::Mesc, Preemption::InstructionLevel),
                Variant::new(Policy::Mesc, Preemption::NonPreemptive),
                Variant::new(Policy::Amc, Preemption::InstructionLevel),
                Variant::new(Policy::Amc, Preemption::NonPreemptive),
            ],
            axis_variant: Variant::new(Policy::Mesc, Preemption::InstructionLevel),
            horizon_cap: 2_000_000_000,
            sweeps: Sweep::ALL.to_vec(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if self.util_grid.is_empty() || self.gamma_grid.is_empty() || self.beta_grid.is_empty() {
            return bad("experiment grids must be non-empty");
        }
        if self.variants.is_empty() {
            return bad("at least one variant is required");
        }
        if self.sets_per_point == 0 {
            return bad("sets_per_point must be positive");
        }
        if self.horizon_cap == 0 {
            return bad("horizon_cap must be positive");
        }
        Ok(())
    }
}

/// One aggregated CSV row: a grid point under one variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub x: f64,
    pub policy: Policy,
    pub preemption: Preemption,
    pub bank_allocation: bool,
    pub sets: usize,
    pub success_ratio: f64,
    pub success_lo_mode: f64,
    pub success_transition: f64,
    pub success_hi_mode: f64,
    /// Mean over runs of each run's LO survivability; runs without LO releases in
    /// HI-mode are left out.
    pub survivability: Option<f64>,
    /// LO completions over LO releases in HI-mode, summed over all runs.
    pub survivability_pooled: Option<f64>,
    pub mean_pi: Option<f64>,
    pub max_pi: Option<Cycles>,
    pub mean_ci: Option<f64>,
    pub max_ci: Option<Cycles>,
    pub mean_save: Option<f64>,
    pub mean_restore: Option<f64>,
    pub mode_switches: u64,
    pub guaranteed_misses: u64,
}

impl SweepRow {
    pub fn label(&self) -> String {
        let p = match self.preemption {
            Preemption::NonPreemptive => "none",
            Preemption::LimitedPreemption => "limited",
            Preemption::InstructionLevel => "instr",
        };
        let pol = match self.policy {
            Policy::Mesc => "mesc",
            Policy::Amc => "amc",
        };
        if self.bank_allocation {
            format!("{pol}/{p}")
        } else {
            format!("{pol}/{p}/no-banks")
        }
    }
}

/// Running sums over many runs of one (point, variant).
#[derive(Clone, Debug, Default)]
struct Tally {
    runs: usize,
    ok: usize,
    ok_mode: [usize; 3],
    lo_rel_hi: u64,
    lo_done_hi: u64,
    surv: (f64, usize),
    pi: (u128, u64, Cycles),
    ci: (u128, u64, Cycles),
    save: (u128, u64),
    restore: (u128, u64),
    switches: u64,
    guaranteed: u64,
}

fn sum_max(acc: &mut (u128, u64, Cycles), v: &[Cycles]) {
    acc.0 += v.iter().map(|&x| x as u128).sum::<u128>();
    acc.1 += v.len() as u64;
    acc.2 = acc.2.max(v.iter().copied().max().unwrap_or(0));
}

fn mean_of(sum: u128, n: u64) -> Option<f64> {
    (n > 0).then(|| sum as f64 / n as f64)
}

impl Tally {
    fn add(&mut self, m: &SimMetrics) {
        self.runs += 1;
        self.ok += m.success as usize;
        for (i, mode) in [Mode::LoMode, Mode::Transition, Mode::HiMode].into_iter().enumerate() {
            if m.lo.in_mode(mode).missed + m.hi.in_mode(mode).missed == 0 {
                self.ok_mode[i] += 1;
            }
        }
        self.lo_rel_hi += m.lo_released_in_hi;
        self.lo_done_hi += m.lo_completed_in_hi;
        if let Some(v) = m.survivability() {
            self.surv.0 += v;
            self.surv.1 += 1;
        }
        sum_max(&mut self.pi, &m.pi_inversions);
        sum_max(&mut self.ci, &m.ci_inversions);
        self.save.0 += m.save_cycles.iter().map(|&x| x as u128).sum::<u128>();
        self.save.1 += m.save_cycles.len() as u64;
        self.restore.0 += m.restore_cycles.iter().map(|&x| x as u128).sum::<u128>();
        self.restore.1 += m.restore_cycles.len() as u64;
        self.switches += m.mode_switches;
        self.guaranteed += m.guaranteed_misses;
    }

    fn row(&self, axis: &str, x: f64, v: Variant, bank_allocation: bool) -> SweepRow {
        let frac = |k: usize| k as f64 / self.runs.max(1) as f64;
        SweepRow {
            axis: axis.to_string(),
            x,
            policy: v.policy,
            preemption: v.preemption,
            bank_allocation,
            sets: self.runs,
            success_ratio: frac(self.ok),
            success_lo_mode: frac(self.ok_mode[0]),
            success_transition: frac(self.ok_mode[1]),
            success_hi_mode: frac(self.ok_mode[2]),
            survivability: (self.surv.1 > 0).then(|| self.surv.0 / self.surv.1 as f64),
            survivability_pooled: (self.lo_rel_hi > 0).then(|| self.lo_done_hi as f64 / self.lo_rel_hi as f64),
            mean_pi: mean_of(self.pi.0, self.pi.1),
            max_pi: (self.pi.1 > 0).then_some(self.pi.2),
            mean_ci: mean_of(self.ci.0, self.ci.1),
            max_ci: (self.ci.1 > 0).then_some(self.ci.2),
            mean_save: mean_of(self.save.0, self.save.1),
            mean_restore: mean_of(self.restore.0, self.restore.1),
            mode_switches: self.switches,
            guaranteed_misses: self.guaranteed,
        }
    }
}

/// One grid point: how to generate its task sets and which configurations to run them under.
#[derive(Clone, Debug)]
pub struct Point {
    pub x: f64,
    pub gen: GenParams,
    pub runs: Vec<(Variant, SystemParams)>,
}

/// Runs `sets` task sets at every point under every configured variant.
pub fn run_points(
    axis: &str,
    points: &[Point],
    sets: usize,
    master: u64,
    base: &SimConfig,
    horizon_periods: u64,
    horizon_cap: Cycles,
) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..sets).map(move |s| (p, s))).collect();
    let results: Vec<Result<Vec<SimMetrics>>> = jobs
        .par_iter()
        .map(|&(p, s)| {
            let point = &points[p];
            let set_seed = derive_seed(master, s as u64);
            let gen = GenParams {
                seed: set_seed,
                ..point.gen.clone()
            };
            let gamma = generate(&gen, &point.runs[0].1)?;
            point
                .runs
                .iter()
                .map(|(v, sys)| {
                    let cfg = run_config(&gamma, base, *v, sys, set_seed, horizon_periods, horizon_cap);
                    sim::run(&gamma, &cfg).map(|mut m| {
                        m.events.clear();
                        m
                    })
                })
                .collect()
        })
        .collect();

    let mut tallies: Vec<Vec<Tally>> = points.iter().map(|p| vec![Tally::default(); p.runs.len()]).collect();
    for (&(p, _), res) in jobs.iter().zip(results) {
        for (t, m) in tallies[p].iter_mut().zip(res?) {
            t.add(&m);
        }
    }
    Ok(points
        .iter()
        .zip(&tallies)
        .flat_map(|(pt, ts)| {
            pt.runs
                .iter()
                .zip(ts)
                .map(|((v, sys), t)| t.row(axis, pt.x, *v, sys.bank_allocation))
        })
        .collect())
}

/// Simulation configuration for one run of a sweep.
pub fn run_config(
    gamma: &TaskSet,
    base: &SimConfig,
    v: Variant,
    sys: &SystemParams,
    seed: u64,
    horizon_periods: u64,
    horizon_cap: Cycles,
) -> SimConfig {
    let mut c = base.clone();
    c.sys = sys.clone();
    c.policy = v.policy;
    c.preemption = v.preemption;
    c.seed = seed;
    c.trace = false;
    if horizon_periods > 0 {
        c.horizon = super::bounded_horizon(gamma, horizon_periods, horizon_cap);
    } else {
        c.horizon = c.horizon.min(horizon_cap);
    }
    c
}

/// Grid points of one sweep.
pub fn points(cfg: &Config, sweep: Sweep) -> Vec<Point> {
    let spec = &cfg.experiment;
    let sys = &cfg.system;
    let at = |u: f64| GenParams {
        total_util: u,
        ..cfg.gen.clone()
    };
    let one = |v: Variant| vec![(v, sys.clone())];
    match sweep {
        Sweep::Utilization => spec
            .util_grid
            .iter()
            .map(|&u| Point {
                x: u,
                gen: at(u),
                runs: spec.variants.iter().map(|&v| (v, sys.clone())).collect(),
            })
            .collect(),
        Sweep::Gamma => spec
            .gamma_grid
            .iter()
            .map(|&g| Point {
                x: g,
                gen: GenParams {
                    crit_proportion: g,
                    ..at(spec.fixed_util)
                },
                runs: one(spec.axis_variant),
            })
            .collect(),
        Sweep::Beta => spec
            .beta_grid
            .iter()
            .map(|&b| Point {
                x: b as f64,
                gen: GenParams {
                    n_tasks: b,
                    ..at(spec.fixed_util)
                },
                runs: one(spec.axis_variant),
            })
            .collect(),
        Sweep::Inversion => vec![Point {
            x: spec.fixed_util,
            gen: at(spec.fixed_util),
            runs: [Preemption::NonPreemptive, Preemption::LimitedPreemption, Preemption::InstructionLevel]
                .into_iter()
                .map(|p| (Variant::new(spec.axis_variant.policy, p), sys.clone()))
                .collect(),
        }],
        Sweep::Overhead => {
            let off = SystemParams {
                bank_allocation: false,
                ..sys.clone()
            };
            vec![Point {
                x: spec.fixed_util,
                gen: at(spec.fixed_util),
                runs: vec![(spec.axis_variant, sys.clone()), (spec.axis_variant, off)],
            }]
        }
    }
}

pub fn run_sweep(cfg: &Config, sweep: Sweep, master: u64) -> Result<Vec<SweepRow>> {
    let spec = &cfg.experiment;
    let mut base = cfg.sim.clone();
    base.sys = cfg.system.clone();
    run_points(
        sweep.name(),
        &points(cfg, sweep),
        spec.sets_per_point,
        master,
        &base,
        cfg.horizon_periods,
        spec.horizon_cap,
    )
}

pub fn write_rows<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "# schema: {SWEEP_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(csv_header())?;
    }
    w.flush()?;
    Ok(())
}

fn csv_header() -> [&'static str; 20] {
    [
        "axis",
        "x",
        "policy",
        "preemption",
        "bank_allocation",
        "sets",
        "success_ratio",
        "success_lo_mode",
        "success_transition",
        "success_hi_mode",
        "survivability",
        "survivability_pooled",
        "mean_pi",
        "max_pi",
        "mean_ci",
        "max_ci",
        "mean_save",
        "mean_restore",
        "mode_switches",
        "guaranteed_misses",
    ]
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r?);
    }
    Ok(rows)
}

/// Runs every configured sweep and writes `<sweep>.csv` (and `<sweep>.svg` with `plots`)
/// into `out_dir`.
pub fn cmd_experiment(cfg: &Config, master: u64, out_dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for &sweep in &cfg.experiment.sweeps {
        let rows = run_sweep(cfg, sweep, master)?;
        let csv_path = out_dir.join(format!("{}.csv", sweep.name()));
        let mut w = BufWriter::new(File::create(&csv_path)?);
        write_rows(&rows, &mut w)?;
        w.flush()?;
        drop(w);
        written.push(csv_path.clone());
        if plots {
            let svg_path = out_dir.join(format!("{}.svg", sweep.name()));
            plot::plot_csv(&csv_path, &svg_path)?;
            written.push(svg_path);
        }
    }
    Ok(written)
}
