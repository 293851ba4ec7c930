use serde::{Deserialize, Serialize};

/// Progressive growth: stage 0 trains `stable` examples, every later stage fades in
/// over `blend` examples and then trains `stable` more at full strength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub stages: usize,
    pub blend: u64,
    pub stable: u64,
    pub progressive: bool,
}

impl TrainSchedule {
    /// Examples seen when `stage` begins.
    pub fn stage_start(&self, stage: usize) -> u64 {
        if stage == 0 {
            0
        } else {
            self.stable + (stage as u64 - 1) * (self.blend + self.stable)
        }
    }

    /// Examples after which the final stage has finished its scheduled budget.
    pub fn total(&self) -> u64 {
        if self.progressive {
            self.stage_start(self.stages - 1) + self.blend + self.stable
        } else {
            self.stable
        }
    }

    /// (stage, α) after `seen` examples.
    pub fn at(&self, seen: u64) -> (usize, f64) {
        if !self.progressive {
            return (self.stages - 1, 1.0);
        }
        let mut stage = 0;
        while stage + 1 < self.stages && seen >= self.stage_start(stage + 1) {
            stage += 1;
        }
        if stage == 0 || self.blend == 0 {
            return (stage, 1.0);
        }
        let into = seen - self.stage_start(stage);
        (stage, (into as f64 / self.blend as f64).min(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> TrainSchedule {
        TrainSchedule { stages: 4, blend: 100, stable: 200, progressive: true }
    }

    #[test]
    fn start_has_no_blend() {
        assert_eq!(sched().at(0), (0, 1.0));
    }

    #[test]
    fn mid_blend_is_half() {
        let s = sched();
        let start = s.stage_start(2);
        assert_eq!(s.at(start + 50), (2, 0.5));
        assert_eq!(s.at(start), (2, 0.0));
        assert_eq!(s.at(start + 100), (2, 1.0));
    }

    #[test]
    fn past_budget_is_final() {
        let s = sched();
        assert_eq!(s.at(s.total()), (3, 1.0));
        assert_eq!(s.at(10 * s.total()), (3, 1.0));
    }

    #[test]
    fn non_progressive_is_always_final() {
        let s = TrainSchedule { progressive: false, ..sched() };
        assert_eq!(s.at(0), (3, 1.0));
    }

    #[test]
    fn alpha_is_monotone_within_stage() {
        let s = sched();
        let mut last = (0, 0.0);
        for seen in 0..s.total() {
            let cur = s.at(seen);
            if cur.0 == last.0 {
                assert!(cur.1 >= last.1);
            }
            last = cur;
        }
    }
}
