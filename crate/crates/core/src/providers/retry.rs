use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ProviderError;

/// Exponential backoff: attempt `n` (1-based) that fails waits
/// `base * 2^(n-1)`, capped at `max_delay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

#[derive(Debug, Clone)]
pub enum AttemptError {
    Retryable(String),
    Fatal(String),
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.max_attempts < 1 {
            return Err(ProviderError::Input("retry max_attempts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn delay_after(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.saturating_sub(1)).unwrap_or(u64::MAX);
        let ms = self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms);
        Duration::from_millis(ms)
    }

    /// Run `op` until it succeeds, fails fatally, or attempts run out.
    /// Returns the value and the number of attempts used.
    pub fn run<T>(
        &self,
        sleep: &dyn Fn(Duration),
        mut op: impl FnMut(u32) -> Result<T, AttemptError>,
    ) -> Result<(T, u32), ProviderError> {
        self.validate()?;
        let mut trace = Vec::new();
        for attempt in 1..=self.max_attempts {
            match op(attempt) {
                Ok(v) => return Ok((v, attempt)),
                Err(AttemptError::Fatal(msg)) => {
                    trace.push(format!("attempt {attempt}: {msg}"));
                    return Err(ProviderError::Transport { attempts: attempt, trace });
                }
                Err(AttemptError::Retryable(msg)) => {
                    trace.push(format!("attempt {attempt}: {msg}"));
                    if attempt < self.max_attempts {
                        sleep(self.delay_after(attempt));
                    }
                }
            }
        }
        Err(ProviderError::Transport {
            attempts: self.max_attempts,
            trace,
        })
    }
}
