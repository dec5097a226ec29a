//! Random task-set generation with UUnifast utilizations.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accel::trace::{make_trace, TraceProfile};
use crate::banks::min_banks_static;
use crate::task::{Criticality, SystemParams, Task, TaskSet};
use crate::{Cycles, Error, Result};

const MAX_RETRIES: usize = 100;

/// How base WCETs are drawn from `c_lo_range`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSampling {
    Uniform,
    /// Uniform in the logarithm, so every order of magnitude of the range is equally likely.
    #[default]
    LogUniform,
}

impl CostSampling {
    pub fn draw<R: Rng + ?Sized>(self, (lo, hi): (Cycles, Cycles), rng: &mut R) -> Cycles {
        match self {
            CostSampling::Uniform => rng.gen_range(lo..=hi),
            CostSampling::LogUniform => {
                let x = rng.gen_range((lo as f64).ln()..=(hi as f64).ln()).exp().round() as Cycles;
                x.clamp(lo, hi)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub n_tasks: usize,
    pub total_util: f64,
    /// c_hi = crit_factor · c_lo for HI tasks.
    pub crit_factor: f64,
    /// Fraction of HI tasks; the count is rounded up.
    pub crit_proportion: f64,
    /// Fraction of accelerator tasks; the count is rounded to nearest.
    pub acc_proportion: f64,
    pub c_lo_range: (Cycles, Cycles),
    pub c_lo_sampling: CostSampling,
    /// Bytes each accelerator task stages into the scratchpad.
    pub footprint_range: (u64, u64),
    pub trace_profile: TraceProfile,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_tasks: 10,
            total_util: 0.7,
            crit_factor: 2.0,
            crit_proportion: 0.5,
            acc_proportion: 1.0,
            c_lo_range: (50_000, 5_000_000),
            c_lo_sampling: CostSampling::LogUniform,
            footprint_range: (4 * 1024, 36 * 1024),
            trace_profile: TraceProfile::default(),
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.n_tasks == 0 {
            return bad("n_tasks must be positive".into());
        }
        if !(self.total_util > 0.0 && self.total_util <= 1.0) {
            return bad(format!("total_util {} outside (0, 1]", self.total_util));
        }
        if !(self.crit_factor >= 1.0) {
            return bad(format!("crit_factor {} below 1", self.crit_factor));
        }
        for (name, v) in [("crit_proportion", self.crit_proportion), ("acc_proportion", self.acc_proportion)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        let (lo, hi) = self.c_lo_range;
        if lo == 0 || lo > hi {
            return bad(format!("c_lo_range [{lo}, {hi}] is empty or starts at zero"));
        }
        if self.footprint_range.0 > self.footprint_range.1 {
            return bad("footprint_range is empty".into());
        }
        self.trace_profile.validate()
    }

    pub fn hi_count(&self) -> usize {
        // The small slack keeps 0.6 · 10 from rounding up to 7.
        ((self.crit_proportion * self.n_tasks as f64) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn acc_count(&self) -> usize {
        (self.acc_proportion * self.n_tasks as f64).round() as usize
    }
}

/// UUnifast with an explicit source of uniform draws in (0, 1).
pub fn uunifast_with(n: usize, total_util: f64, mut draw: impl FnMut() -> f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParam("uunifast needs at least one task".into()));
    }
    if !(total_util > 0.0) {
        return Err(Error::InvalidParam(format!("total utilization {total_util} must be positive")));
    }
    let mut out = Vec::with_capacity(n);
    let mut sum = total_util;
    for i in 1..n {
        let next = sum * draw().powf(1.0 / (n - i) as f64);
        out.push(sum - next);
        sum = next;
    }
    out.push(sum);
    Ok(out)
}

pub fn uunifast<R: Rng + ?Sized>(n: usize, total_util: f64, rng: &mut R) -> Result<Vec<f64>> {
    uunifast_with(n, total_util, || loop {
        let r: f64 = rng.gen();
        if r > 0.0 {
            break r;
        }
    })
}

/// Builds a task set from `params.seed` alone; equal parameters give equal sets.
pub fn generate(params: &GenParams, sys: &SystemParams) -> Result<TaskSet> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_tasks;

    let mut drawn = None;
    for _ in 0..MAX_RETRIES {
        let utils = uunifast(n, params.total_util, &mut rng)?;
        let c_lo: Vec<Cycles> = (0..n).map(|_| params.c_lo_sampling.draw(params.c_lo_range, &mut rng)).collect();
        let periods: Vec<Cycles> = c_lo.iter().zip(&utils).map(|(&c, &u)| (c as f64 / u).round() as Cycles).collect();
        if periods.iter().zip(&c_lo).all(|(&t, &c)| t >= c && t < Cycles::MAX / 2) {
            drawn = Some((c_lo, periods));
            break;
        }
    }
    let (c_lo, periods) =
        drawn.ok_or_else(|| Error::Generation(format!("no valid periods after {MAX_RETRIES} attempts")))?;

    let hi_idx = sample(&mut rng, n, params.hi_count()).into_vec();
    let acc_idx = sample(&mut rng, n, params.acc_count()).into_vec();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| (periods[k], k));
    let mut priority = vec![0u32; n];
    for (rank, &k) in order.iter().enumerate() {
        priority[k] = rank as u32 + 1;
    }

    let mut tasks = Vec::with_capacity(n);
    for k in 0..n {
        let id = k as u32 + 1;
        let mut t = if acc_idx.contains(&k) {
            let fp = rng.gen_range(params.footprint_range.0..=params.footprint_range.1);
            let trace = make_trace(c_lo[k], fp, &mut rng, &params.trace_profile)?;
            Task::accelerated(id, priority[k], periods[k], trace)
                .with_footprint(fp)
                .with_banks(min_banks_static(fp, true, sys))
        } else {
            Task::cpu_only(id, priority[k], periods[k], c_lo[k])
        };
        if hi_idx.contains(&k) {
            t = t.hi((params.crit_factor * c_lo[k] as f64).round() as Cycles);
        }
        debug_assert_eq!(t.level == Criticality::Hi, hi_idx.contains(&k));
        tasks.push(t);
    }
    TaskSet::new(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uunifast_single_task_takes_everything() {
        assert_eq!(uunifast_with(1, 0.7, || unreachable!()).unwrap(), vec![0.7]);
        assert!(uunifast_with(0, 0.7, || 0.5).is_err());
    }

    #[test]
    fn uunifast_fixed_draws() {
        let u = uunifast_with(3, 0.9, || 0.5).unwrap();
        let s = 0.5f64.sqrt();
        let expect = [0.9 * (1.0 - s), 0.9 * s * 0.5, 0.9 * s * 0.5];
        for (a, b) in u.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn one_task_period_from_utilization() {
        let p = GenParams {
            n_tasks: 1,
            total_util: 0.5,
            c_lo_range: (10_000, 10_000),
            footprint_range: (0, 0),
            ..GenParams::default()
        };
        let s = generate(&p, &SystemParams::default()).unwrap();
        let t = &s.tasks()[0];
        assert_eq!((t.period, t.deadline, t.c_lo), (20_000, 20_000, 10_000));
    }

    #[test]
    fn half_of_ten_are_hi() {
        let p = GenParams::default();
        let s = generate(&p, &SystemParams::default()).unwrap();
        assert_eq!(s.iter().filter(|t| t.is_hi()).count(), 5);
        assert!(s.iter().all(|t| !t.is_hi() || t.c_hi == 2 * t.c_lo));
    }

    #[test]
    fn hi_count_rounds_up_without_float_noise() {
        let mut p = GenParams::default();
        p.crit_proportion = 0.6;
        assert_eq!(p.hi_count(), 6);
        p.crit_proportion = 0.25;
        assert_eq!(p.hi_count(), 3);
    }

    #[test]
    fn rejects_bad_parameters() {
        let sys = SystemParams::default();
        let p = GenParams {
            crit_proportion: 1.5,
            ..GenParams::default()
        };
        assert!(matches!(generate(&p, &sys), Err(Error::InvalidParam(_))));
    }
}
