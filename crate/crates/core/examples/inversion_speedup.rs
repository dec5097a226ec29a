//! Priority- and criticality-inversion lengths under the three preemption granularities.
//!
//!     cargo run --release --example inversion_speedup -- [sets]

use mesc::harness::experiment::{run_sweep, Sweep};
use mesc::harness::Config;
use mesc::sim::Preemption;

fn main() -> mesc::Result<()> {
    let sets = std::env::args().nth(1).map_or(30, |s| s.parse().expect("set count"));
    let mut cfg = Config::default();
    cfg.gen.c_lo_range = (1_000_000, 10_000_000);
    cfg.experiment.sets_per_point = sets;
    let rows = run_sweep(&cfg, Sweep::Inversion, 1)?;

    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.0}"));
    println!("{:<10} {:>12} {:>12} {:>12} {:>12}", "preemption", "mean pi", "max pi", "mean ci", "max ci");
    for r in &rows {
        println!(
            "{:<10} {:>12} {:>12} {:>12} {:>12}",
            format!("{:?}", r.preemption),
            fmt(r.mean_pi),
            r.max_pi.map_or("-".into(), |v| v.to_string()),
            fmt(r.mean_ci),
            r.max_ci.map_or("-".into(), |v| v.to_string())
        );
    }
    let get = |p| rows.iter().find(|r| r.preemption == p).unwrap();
    let (np, il) = (get(Preemption::NonPreemptive), get(Preemption::InstructionLevel));
    if let (Some(a), Some(b)) = (np.mean_pi, il.mean_pi) {
        println!("pi speedup {:.0}x", a / b);
    }
    if let (Some(a), Some(b)) = (np.mean_ci, il.mean_ci) {
        println!("ci speedup {:.0}x", a / b);
    }
    Ok(())
}
