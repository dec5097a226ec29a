//! A reduced utilization sweep written as CSV and SVG into a directory.
//!
//!     cargo run --release --example experiment_sweep -- [out_dir] [sets]

use std::path::PathBuf;

use mesc::harness::experiment::{cmd_experiment, Sweep};
use mesc::harness::Config;

fn main() -> mesc::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "results".into()));
    let sets = args.next().map_or(20, |s| s.parse().expect("set count"));

    let mut cfg = Config::default();
    cfg.gen.c_lo_range = (1_000_000, 100_000_000);
    cfg.experiment.sets_per_point = sets;
    cfg.experiment.util_grid = vec![0.5, 0.7, 0.85];
    cfg.experiment.sweeps = vec![Sweep::Utilization, Sweep::Gamma];
    for p in cmd_experiment(&cfg, 42, &out, true)? {
        println!("{}", p.display());
    }

    let rows = mesc::harness::experiment::read_rows(std::fs::File::open(out.join("utilization.csv"))?)?;
    for r in rows {
        println!("U={:<5} {:<12} success {:.2}", r.x, r.label(), r.success_ratio);
    }
    Ok(())
}
