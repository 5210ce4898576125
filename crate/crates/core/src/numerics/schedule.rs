use serde::{Deserialize, Serialize};

use super::{NumericsError, Result};

/// Linear warmup from 0 to `peak_lr`, then linear decay back to 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn new(peak_lr: f64, warmup_steps: usize, total_steps: usize) -> Result<Self> {
        if !(peak_lr.is_finite() && peak_lr >= 0.0) {
            return Err(NumericsError::InvalidSchedule(format!("peak lr {peak_lr}")));
        }
        if warmup_steps > total_steps {
            return Err(NumericsError::InvalidSchedule(format!(
                "warmup {warmup_steps} exceeds total {total_steps}"
            )));
        }
        Ok(LrSchedule {
            peak_lr,
            warmup_steps,
            total_steps,
        })
    }

    /// Warmup covering `fraction` of the total, rounded to whole steps.
    pub fn with_warmup_fraction(peak_lr: f64, total_steps: usize, fraction: f64) -> Result<Self> {
        let warmup = (fraction.clamp(0.0, 1.0) * total_steps as f64).round() as usize;
        Self::new(peak_lr, warmup.min(total_steps), total_steps)
    }

    pub fn lr_at(&self, step: usize) -> Result<f64> {
        if step > self.total_steps {
            return Err(NumericsError::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        let lr = if step < self.warmup_steps {
            self.peak_lr * (step as f64 / self.warmup_steps as f64)
        } else if self.total_steps == self.warmup_steps {
            self.peak_lr
        } else {
            self.peak_lr
                * ((self.total_steps - step) as f64 / (self.total_steps - self.warmup_steps) as f64)
        };
        Ok(lr)
    }
}
