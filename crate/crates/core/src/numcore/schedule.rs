use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multi-step learning-rate decay: the base rate is multiplied by `gamma`
/// once for every milestone epoch already reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub base_lr: f64,
    #[serde(default)]
    pub milestones: Vec<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    0.1
}

impl LrSchedule {
    pub fn new(base_lr: f64, milestones: Vec<usize>, gamma: f64) -> Result<Self> {
        let s = Self {
            base_lr,
            milestones,
            gamma,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(base_lr: f64) -> Self {
        Self {
            base_lr,
            milestones: Vec::new(),
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0) || !self.base_lr.is_finite() {
            return Err(Error::validation("learning rate must be positive and finite"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::validation("decay factor must lie in (0, 1]"));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("milestones must be strictly increasing"));
        }
        Ok(())
    }

    /// Learning rate in effect during the 0-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| m <= epoch).count();
        self.base_lr * self.gamma.powi(passed as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs()
    }

    #[test]
    fn multistep_decay() {
        let s = LrSchedule::new(5e-4, vec![60, 120, 180], 0.1).unwrap();
        assert_eq!(s.lr_at(0), 5e-4);
        assert_eq!(s.lr_at(59), 5e-4);
        assert!(close(s.lr_at(60), 5e-5));
        assert!(close(s.lr_at(130), 5e-6));
        assert!(close(s.lr_at(200), 5e-7));
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(LrSchedule::new(1e-3, vec![10, 10], 0.1).is_err());
        assert!(LrSchedule::new(1e-3, vec![20, 10], 0.1).is_err());
        assert!(LrSchedule::new(1e-3, vec![], 0.0).is_err());
        assert!(LrSchedule::new(1e-3, vec![], 1.5).is_err());
        assert!(LrSchedule::new(0.0, vec![], 0.5).is_err());
        assert!(LrSchedule::new(1e-3, vec![5], 1.0).is_ok());
    }
}
