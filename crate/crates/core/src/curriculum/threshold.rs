use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linearly decaying hardness threshold `a·(1 − t/T) + b` over the `T`
/// iterations of one epoch: `a + b` at `t = 0`, `b` at `t = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub a: f64,
    pub b: f64,
    pub iterations: usize,
}

impl ThresholdSchedule {
    pub fn new(a: f64, b: f64, iterations: usize) -> Result<Self> {
        validate_bounds(a, b)?;
        if iterations == 0 {
            return Err(Error::validation("threshold schedule needs at least one iteration per epoch"));
        }
        Ok(Self { a, b, iterations })
    }

    /// Threshold at iteration `t` of the epoch, `0 <= t <= T`.
    pub fn threshold(&self, t: usize) -> Result<f64> {
        if t > self.iterations {
            return Err(Error::validation(format!(
                "iteration {t} beyond epoch length {}",
                self.iterations
            )));
        }
        let progress = t as f64 / self.iterations as f64;
        Ok(self.a * (1.0 - progress) + self.b)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.b, self.a + self.b)
    }
}

/// `a > b > 0` and `a + b <= 1`: the threshold is a fraction of a loss sum.
pub(crate) fn validate_bounds(a: f64, b: f64) -> Result<()> {
    if !(b > 0.0 && a > b) {
        return Err(Error::validation(format!("threshold bounds need a > b > 0, got a={a}, b={b}")));
    }
    if a + b > 1.0 {
        return Err(Error::validation(format!("threshold bounds need a + b <= 1, got {}", a + b)));
    }
    Ok(())
}
