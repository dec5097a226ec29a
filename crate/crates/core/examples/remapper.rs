//! Two tasks staging data through the address remapper into their own banks.
//!
//!     cargo run --example remapper

use mesc::accel::ScratchpadState;
use mesc::task::SystemParams;

fn main() -> mesc::Result<()> {
    let sys = SystemParams::default();
    let mut sp = ScratchpadState::new(sys.total_banks, sys.bank_size, sys.remap_block_size);
    println!("remapping block holds {} entries", sp.remap().capacity());

    // Both tasks were compiled against address 0; the remapper keeps them apart.
    for p in sp.remap_write(1, 2, 0, 40 * 1024)? {
        println!("task 1: {} B -> bank {} offset {}", p.bytes, p.bank, p.offset);
    }
    for p in sp.remap_write(2, 1, 0, 16 * 1024)? {
        println!("task 2: {} B -> bank {} offset {}", p.bytes, p.bank, p.offset);
    }
    for (task, addr) in [(1, 0x100), (1, 36 * 1024), (2, 0x100)] {
        let (bank, off) = sp.remap_read(task, addr)?;
        println!("task {task} address {addr:#x} -> bank {bank} offset {off}");
    }

    match sp.remap_write(2, 1, 16 * 1024, 20 * 1024) {
        Ok(_) => println!("unexpected: task 2 exceeded its bank allowance"),
        Err(e) => println!("task 2 over its allowance: {e}"),
    }

    println!("free banks {} of {}", sp.free_banks(), sys.total_banks);
    println!("evicting task 1 frees {} banks", sp.release_banks(1));
    println!("free banks {}", sp.free_banks());
    Ok(())
}
