//! Draws a random task set and prints it as the JSON document `mesc gen` writes.
//!
//!     cargo run --example generate_taskset -- [utilization] [tasks] [seed]

use mesc::generate::{generate, GenParams};
use mesc::harness::TaskSetDoc;
use mesc::task::SystemParams;

fn main() -> mesc::Result<()> {
    let mut args = std::env::args().skip(1);
    let total_util = args.next().map_or(0.7, |s| s.parse().expect("utilization"));
    let n_tasks = args.next().map_or(6, |s| s.parse().expect("task count"));
    let seed = args.next().map_or(1, |s| s.parse().expect("seed"));

    let sys = SystemParams::default();
    let params = GenParams {
        total_util,
        n_tasks,
        seed,
        ..GenParams::default()
    };
    let gamma = generate(&params, &sys)?;

    eprintln!("{:>3} {:>4} {:>5} {:>12} {:>10} {:>10} {:>6} {:>6}", "id", "prio", "level", "period", "c_lo", "c_hi", "acc", "banks");
    for t in gamma.iter() {
        eprintln!(
            "{:>3} {:>4} {:>5} {:>12} {:>10} {:>10} {:>6} {:>6}",
            t.id,
            t.priority,
            t.level.to_string(),
            t.period,
            t.c_lo,
            t.c_hi,
            t.uses_accelerator(),
            t.banks
        );
    }
    eprintln!("total utilization {:.4}", gamma.total_utilization());
    println!("{}", serde_json::to_string_pretty(&TaskSetDoc::new(gamma, Some(seed)))?);
    Ok(())
}
