//! Forces HI-mode switches and compares what MESC and AMC do with LO work.
//!
//!     cargo run --example simulate_mode_switch

use mesc::accel::trace::InstructionTrace;
use mesc::sim::{run, EventKind, Policy, SimConfig};
use mesc::task::{Task, TaskSet};

fn main() -> mesc::Result<()> {
    let acc = |id, prio, period, c, max_instr| -> mesc::Result<Task> {
        Ok(Task::accelerated(id, prio, period, InstructionTrace::uniform(c, max_instr)?)
            .with_footprint(48 * 1024)
            .with_banks(2))
    };
    let gamma = TaskSet::new(vec![
        acc(1, 1, 400_000, 60_000, 2000)?.hi(150_000),
        acc(2, 2, 500_000, 80_000, 2000)?,
        Task::cpu_only(3, 3, 800_000, 100_000),
        acc(4, 4, 1_000_000, 90_000, 3000)?.hi(180_000),
        acc(5, 5, 2_000_000, 200_000, 5000)?,
    ])?;

    for policy in [Policy::Mesc, Policy::Amc] {
        let cfg = SimConfig {
            horizon: 20_000_000,
            policy,
            overrun_prob: 0.2,
            overrun_scale: 2.0,
            seed: 7,
            trace: true,
            ..SimConfig::default()
        };
        let m = run(&gamma, &cfg)?;
        let (lo, hi) = (m.lo.total(), m.hi.total());
        println!("{policy:?}");
        println!("  mode switches        {}", m.mode_switches);
        println!("  HI released/done/missed  {}/{}/{}", hi.released, hi.completed, hi.missed);
        println!("  LO released/done/missed/dropped  {}/{}/{}/{}", lo.released, lo.completed, lo.missed, lo.dropped);
        println!("  LO survivability in HI-mode  {:?}", m.survivability());
        println!("  guaranteed misses    {}", m.guaranteed_misses);
        let first: Vec<String> = m
            .events
            .iter()
            .filter(|e| e.kind == EventKind::ModeChange)
            .take(6)
            .map(|e| format!("{}@{}", e.duration, e.time))
            .collect();
        println!("  first mode changes (mode@cycle)  {}", first.join(" "));
    }
    Ok(())
}
