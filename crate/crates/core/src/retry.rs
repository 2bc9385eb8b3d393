//! Bounded exponential backoff with jitter.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub multiplier: f64,
    /// Each delay is scaled by a uniform factor in `[1 - jitter, 1 + jitter]`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, initial_backoff_ms: 1000, max_backoff_ms: 30_000, multiplier: 2.0, jitter: 0.25 }
    }
}

/// Whether a failed attempt may be repeated.
pub enum Attempt<E> {
    Retry(E),
    Fail(E),
}

impl RetryPolicy {
    /// Nominal delay before attempt `attempt + 1` (0-based), before jitter.
    pub fn nominal_delay(&self, attempt: u32) -> Duration {
        let ms = self.initial_backoff_ms as f64 * self.multiplier.powi(attempt as i32);
        Duration::from_millis(ms.min(self.max_backoff_ms as f64) as u64)
    }

    fn jittered(&self, attempt: u32) -> Duration {
        let j = self.jitter.clamp(0.0, 1.0);
        let factor = 1.0 - j + 2.0 * j * rand::random::<f64>();
        self.nominal_delay(attempt).mul_f64(factor)
    }

    /// Run `op` until it succeeds, fails permanently, or attempts run out.
    /// Returns the last error together with the number of attempts made.
    pub fn run<T, E>(&self, mut op: impl FnMut(u32) -> Result<T, Attempt<E>>) -> Result<T, (E, u32)> {
        let attempts = self.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fail(e)) => return Err((e, attempt + 1)),
                Err(Attempt::Retry(e)) => {
                    if attempt + 1 >= attempts {
                        return Err((e, attempt + 1));
                    }
                    let d = self.jittered(attempt);
                    log::warn!("attempt {} failed, retrying in {:?}", attempt + 1, d);
                    thread::sleep(d);
                    attempt += 1;
                }
            }
        }
    }
}
