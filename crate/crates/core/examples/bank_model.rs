//! Bank sizing and the switch overhead saved by keeping banks resident.
//!
//!     cargo run --release --example bank_model

use mesc::accel::cost;
use mesc::banks::{min_banks_profiled, min_banks_static, ProfilePoint, DEFAULT_EPS};
use mesc::harness::experiment::{run_sweep, Sweep};
use mesc::harness::Config;
use mesc::task::SystemParams;

fn main() -> mesc::Result<()> {
    let sys = SystemParams::default();
    println!("bank size {} B, {} banks", sys.bank_size, sys.total_banks);
    println!("moving one bank {} cycles", cost::per_bank(&sys));
    println!("fixed save {} / restore {} cycles", cost::save_fixed(&sys), cost::restore_fixed(&sys));
    println!("worst case save {} / restore {} cycles\n", sys.y_save(), sys.y_restore());

    for kb in [4, 32, 33, 100, 1024] {
        println!("{kb:>5} KB footprint -> {} banks", min_banks_static(kb * 1024, true, &sys));
    }

    // Execution time flattens once the working set fits; pick the knee.
    let profile: Vec<ProfilePoint> = [(1, 9_400_000), (2, 6_100_000), (3, 5_020_000), (4, 5_000_000), (6, 4_990_000), (8, 4_990_000)]
        .into_iter()
        .map(|(banks, exec_cycles)| ProfilePoint { banks, exec_cycles })
        .collect();
    println!("profiled minimum within {:.0}%: {} banks\n", DEFAULT_EPS * 100.0, min_banks_profiled(&profile, DEFAULT_EPS)?);

    let mut cfg = Config::default();
    cfg.experiment.sets_per_point = 40;
    let rows = run_sweep(&cfg, Sweep::Overhead, 3)?;
    for r in &rows {
        println!(
            "{:<22} save {:>7.0} restore {:>7.0}",
            r.label(),
            r.mean_save.unwrap_or(0.0),
            r.mean_restore.unwrap_or(0.0)
        );
    }
    Ok(())
}
