//! Progress of a running job under the periodic scheduler check.
//!
//! Every `period` cycles the CPU spends `check` cycles in the scheduler, stalling the
//! running job. These helpers answer "how much work between two instants" and "when is
//! a given amount of work done" without materialising every tick.

use crate::Cycles;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TickClock {
    pub period: Cycles,
    pub check: Cycles,
}

impl TickClock {
    pub fn new(period: Cycles, check: Cycles) -> Self {
        assert!(period > 0 && check < period, "check must fit inside the tick period");
        TickClock { period, check }
    }

    /// Stalled cycles in `[0, x)`.
    fn stalled(&self, x: Cycles) -> Cycles {
        (x / self.period) * self.check + (x % self.period).min(self.check)
    }

    /// Cycles of useful work in `[0, x)`.
    fn useful(&self, x: Cycles) -> Cycles {
        x - self.stalled(x)
    }

    /// Work done between `from` and `to`.
    pub fn work_in(&self, from: Cycles, to: Cycles) -> Cycles {
        debug_assert!(from <= to);
        self.useful(to) - self.useful(from)
    }

    /// Earliest instant at which `work` cycles started at `from` are done.
    pub fn finish_at(&self, from: Cycles, work: Cycles) -> Cycles {
        if work == 0 {
            return from;
        }
        let target = self.useful(from) + work;
        let span = self.period - self.check;
        let q = (target - 1) / span;
        let r = target - q * span;
        q * self.period + self.check + r
    }

    /// First scheduler check to complete at or after `t`, counting the tick at `t` itself.
    pub fn check_done_after(&self, t: Cycles) -> Cycles {
        t.div_ceil(self.period) * self.period + self.check
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_work(c: &TickClock, from: Cycles, to: Cycles) -> Cycles {
        (from..to).filter(|x| x % c.period >= c.check).count() as Cycles
    }

    #[test]
    fn matches_cycle_by_cycle_count() {
        let c = TickClock::new(50, 7);
        for from in 0..120 {
            for to in from..260 {
                assert_eq!(c.work_in(from, to), brute_work(&c, from, to), "{from}..{to}");
            }
            for w in 1..150 {
                let t = c.finish_at(from, w);
                assert_eq!(c.work_in(from, t), w);
                assert!(c.work_in(from, t - 1) < w);
            }
        }
    }

    #[test]
    fn zero_check_is_wall_clock() {
        let c = TickClock::new(5000, 0);
        assert_eq!(c.finish_at(123, 10_000), 10_123);
        assert_eq!(c.work_in(0, 777), 777);
    }

    #[test]
    fn next_check() {
        let c = TickClock::new(5000, 100);
        assert_eq!(c.check_done_after(0), 100);
        assert_eq!(c.check_done_after(5000), 5100);
        assert_eq!(c.check_done_after(5001), 10_100);
    }
}
