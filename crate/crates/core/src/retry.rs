use std::time::Duration;

use crate::error::Result;

/// Retries retryable failures with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra attempts after the first.
    pub budget: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            budget: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn new(budget: u32, base_delay: Duration) -> Self {
        RetryPolicy { budget, base_delay }
    }

    pub fn immediate(budget: u32) -> Self {
        Self::new(budget, Duration::ZERO)
    }

    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            match op() {
                Err(e) if e.is_retryable() && attempt < self.budget => {
                    let delay = self.base_delay.saturating_mul(1 << attempt.min(16));
                    tracing::debug!(attempt, ?delay, error = %e, "retrying");
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
