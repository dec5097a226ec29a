//! Response-time analysis of a small hand-written system, then of random sets.
//!
//!     cargo run --example wcrt_analysis

use mesc::accel::trace::InstructionTrace;
use mesc::analysis::{analyze, Response};
use mesc::generate::{generate, GenParams};
use mesc::harness::write_analysis_csv;
use mesc::task::{SystemParams, Task, TaskSet};

fn show(r: Response) -> String {
    match r {
        Response::Bounded(v) => v.to_string(),
        Response::Unschedulable => "unbounded".into(),
    }
}

fn main() -> mesc::Result<()> {
    let sys = SystemParams::default();
    let gamma = TaskSet::new(vec![
        Task::accelerated(1, 1, 2_000_000, InstructionTrace::uniform(300_000, 4000)?).hi(600_000),
        Task::cpu_only(2, 2, 3_000_000, 250_000),
        Task::accelerated(3, 3, 5_000_000, InstructionTrace::uniform(800_000, 9000)?).hi(1_200_000),
        Task::accelerated(4, 4, 8_000_000, InstructionTrace::uniform(1_000_000, 7000)?),
    ])?;
    let result = analyze(&gamma, &sys)?;
    write_analysis_csv(&result, std::io::stdout().lock())?;
    for a in &result.tasks {
        if let Some(h) = &a.hi {
            println!(
                "task {}: R_lo {} R_hi {} R* {} (deadline {})",
                a.id,
                show(a.r_lo),
                show(h.r_hi),
                show(h.r_star),
                a.deadline
            );
        }
    }
    println!("schedulable: {}", result.schedulable);

    println!("\nutilization  schedulable/100");
    for u in [0.3, 0.5, 0.7, 0.9] {
        let mut ok = 0;
        for seed in 0..100 {
            let g = generate(&GenParams { total_util: u, seed, ..GenParams::default() }, &sys)?;
            ok += analyze(&g, &sys)?.schedulable as usize;
        }
        println!("{u:>11}  {ok}");
    }
    Ok(())
}
