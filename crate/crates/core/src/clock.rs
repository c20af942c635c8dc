//! Planner time source: wall clock, or a virtual clock that advances a fixed
//! amount per unit of work.

use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BudgetMode {
    WallClock,
    /// Each expansion or rewiring iteration costs `t_exp / iterations_per_slice` seconds.
    Deterministic { iterations_per_slice: u32 },
}

impl BudgetMode {
    pub const DEFAULT_ITERATIONS_PER_SLICE: u32 = 150;

    pub fn deterministic() -> Self {
        BudgetMode::Deterministic {
            iterations_per_slice: Self::DEFAULT_ITERATIONS_PER_SLICE,
        }
    }

    pub fn is_deterministic(self) -> bool {
        matches!(self, BudgetMode::Deterministic { .. })
    }
}

#[derive(Debug, Clone)]
pub struct PlannerClock {
    start: Instant,
    units: u64,
    unit_s: Option<f64>,
}

impl PlannerClock {
    pub fn new(mode: BudgetMode, t_exp: f64) -> Self {
        let unit_s = match mode {
            BudgetMode::WallClock => None,
            BudgetMode::Deterministic { iterations_per_slice } => {
                Some(t_exp / iterations_per_slice.max(1) as f64)
            }
        };
        PlannerClock {
            start: Instant::now(),
            units: 0,
            unit_s,
        }
    }

    /// Seconds since the clock was created.
    pub fn now(&self) -> f64 {
        match self.unit_s {
            None => self.start.elapsed().as_secs_f64(),
            Some(u) => self.units as f64 * u,
        }
    }

    /// Records one iteration of work. No effect on a wall clock.
    #[inline]
    pub fn charge(&mut self) {
        self.units += 1;
    }

    pub fn units(&self) -> u64 {
        self.units
    }

    pub fn is_virtual(&self) -> bool {
        self.unit_s.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_time_counts_units() {
        let mut c = PlannerClock::new(BudgetMode::Deterministic { iterations_per_slice: 100 }, 0.15);
        assert_eq!(c.now(), 0.0);
        for _ in 0..100 {
            c.charge();
        }
        assert!((c.now() - 0.15).abs() < 1e-12);
    }

    #[test]
    fn wall_clock_moves_forward() {
        let c = PlannerClock::new(BudgetMode::WallClock, 0.15);
        let a = c.now();
        std::thread::sleep(std::time::Duration::from_millis(2));
        assert!(c.now() > a);
    }
}
