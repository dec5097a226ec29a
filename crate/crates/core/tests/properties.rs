use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mesc::accel::trace::InstructionTrace;
use mesc::accel::ScratchpadState;
use mesc::analysis::{analyze, response_lo, Response};
use mesc::generate::{generate, uunifast, CostSampling, GenParams};
use mesc::sim::clock::TickClock;
use mesc::sim::{run, Policy, Preemption, SimConfig};
use mesc::task::{SystemParams, Task, TaskSet};

fn params() -> impl Strategy<Value = GenParams> {
    (2usize..=8, 0.2f64..0.9, 0.0f64..=1.0, 0.0f64..=1.0, any::<u64>()).prop_map(|(n, u, crit, acc, seed)| GenParams {
        n_tasks: n,
        total_util: u,
        crit_proportion: crit,
        acc_proportion: acc,
        c_lo_range: (20_000, 400_000),
        seed,
        ..GenParams::default()
    })
}

fn preemption() -> impl Strategy<Value = Preemption> {
    prop_oneof![
        Just(Preemption::NonPreemptive),
        Just(Preemption::LimitedPreemption),
        Just(Preemption::InstructionLevel)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn uunifast_sums_to_target(n in 1usize..30, u in 0.01f64..=1.0, seed in any::<u64>()) {
        let v = uunifast(n, u, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(v.len(), n);
        prop_assert!((v.iter().sum::<f64>() - u).abs() < 1e-9);
        prop_assert!(v.iter().all(|&x| x > 0.0 && x <= u));
    }

    #[test]
    fn cost_draws_stay_in_range(lo in 1u64..1_000_000, span in 0u64..100_000_000, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in [CostSampling::Uniform, CostSampling::LogUniform] {
            let x = s.draw((lo, lo + span), &mut rng);
            prop_assert!((lo..=lo + span).contains(&x));
        }
    }

    #[test]
    fn generated_sets_are_valid(p in params()) {
        let sys = SystemParams::default();
        let g = generate(&p, &sys).unwrap();
        prop_assert_eq!(g.len(), p.n_tasks);
        prop_assert!(g.validate_for(&sys).is_ok());
        prop_assert_eq!(g.iter().filter(|t| t.is_hi()).count(), p.hi_count());
        prop_assert_eq!(g.iter().filter(|t| t.uses_accelerator()).count(), p.acc_count());
        // Periods are rounded, so the realised utilization drifts slightly.
        prop_assert!((g.total_utilization() - p.total_util).abs() < 1e-3);
        for t in g.iter() {
            prop_assert!(t.c_hi >= t.c_lo && t.deadline == t.period);
        }
    }

    #[test]
    fn generation_is_deterministic(p in params()) {
        let sys = SystemParams::default();
        prop_assert_eq!(generate(&p, &sys).unwrap(), generate(&p, &sys).unwrap());
    }

    #[test]
    fn analysis_terms_are_ordered(p in params()) {
        let sys = SystemParams::default();
        let g = generate(&p, &sys).unwrap();
        for a in analyze(&g, &sys).unwrap().tasks {
            let t = g.get(a.id).unwrap();
            prop_assert!(a.pb_lo >= sys.t_sr);
            if let Response::Bounded(r) = a.r_lo {
                prop_assert!(r >= a.b_lo + t.c_lo && r <= t.deadline);
            }
            if let Some(h) = a.hi {
                prop_assert!(h.b_hi >= h.pb_hi && h.b_hi >= h.cb_hi);
                if let (Response::Bounded(hi), Response::Bounded(star)) = (h.r_hi, h.r_star) {
                    prop_assert!(star >= hi);
                }
            }
        }
    }

    #[test]
    fn response_grows_with_interference(c in 1_000u64..50_000, extra in 1u64..20_000) {
        let sys = SystemParams::zero_overhead(5000);
        let set = |c1| TaskSet::new(vec![
            Task::cpu_only(1, 1, 200_000, c1),
            Task::cpu_only(2, 2, 1_000_000, c),
        ]).unwrap();
        let a = response_lo(2, &set(10_000), &sys).unwrap();
        let b = response_lo(2, &set(10_000 + extra), &sys).unwrap();
        if let (Response::Bounded(a), Response::Bounded(b)) = (a, b) {
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn tick_clock_round_trips(period in 10u64..10_000, check_frac in 0.0f64..0.9, from in 0u64..1_000_000, work in 0u64..1_000_000) {
        let check = (period as f64 * check_frac) as u64;
        let c = TickClock::new(period, check);
        let end = c.finish_at(from, work);
        prop_assert_eq!(c.work_in(from, end), work);
        if work > 0 {
            prop_assert!(c.work_in(from, end - 1) < work);
        }
    }

    #[test]
    fn remapper_translates_what_it_wrote(writes in prop::collection::vec((1u32..4, 1u64..40_000), 1..8)) {
        let sys = SystemParams::default();
        let mut sp = ScratchpadState::new(sys.total_banks, sys.bank_size, sys.remap_block_size);
        let mut next_addr = [0u64; 4];
        for (task, bytes) in writes {
            // Task k may lock k banks.
            let eta = task;
            let addr = next_addr[task as usize];
            if sp.remap_write(task, eta, addr, bytes).is_ok() {
                next_addr[task as usize] += bytes;
                let (bank, off) = sp.remap_read(task, addr + bytes - 1).unwrap();
                prop_assert_eq!(sp.banks()[bank].locked_by, Some(task));
                prop_assert!(off < sys.bank_size);
                prop_assert!(sp.locked_by(task) <= eta);
            }
            prop_assert!(sp.check(|_| sys.total_banks).is_ok());
        }
    }

    #[test]
    fn simulation_conserves_jobs(p in params(), pre in preemption(), amc in any::<bool>(), prob in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = generate(&p, &SystemParams::default()).unwrap();
        let cfg = SimConfig {
            horizon: g.max_period() * 4,
            seed,
            preemption: pre,
            policy: if amc { Policy::Amc } else { Policy::Mesc },
            overrun_prob: prob,
            ..SimConfig::default()
        };
        let m = run(&g, &cfg).unwrap();
        prop_assert!(m.conserved());
        prop_assert!(m.guaranteed_misses <= m.misses());
        prop_assert!(m.lo_completed_in_hi <= m.lo_released_in_hi);
        if !amc {
            prop_assert_eq!(m.lo.total().dropped, 0);
        }
        prop_assert_eq!(&m, &run(&g, &cfg).unwrap());
    }

    #[test]
    fn no_overrun_means_no_mode_switch(p in params(), seed in any::<u64>()) {
        let g = generate(&p, &SystemParams::default()).unwrap();
        let cfg = SimConfig { horizon: g.max_period() * 3, seed, overrun_prob: 0.0, ..SimConfig::default() };
        let m = run(&g, &cfg).unwrap();
        prop_assert_eq!(m.mode_switches, 0);
        prop_assert!(m.ci_inversions.is_empty());
        prop_assert_eq!(m.lo_released_in_hi, 0);
    }
}

#[test]
fn trace_rejects_empty_and_oversized_instructions() {
    assert!(InstructionTrace::uniform(0, 100).is_err() || InstructionTrace::uniform(0, 100).unwrap().is_empty());
    let t = InstructionTrace::uniform(10_500, 1000).unwrap();
    assert_eq!(t.total_cycles(), 10_500);
    assert_eq!(t.max_instr_cycles(), 1000);
}
