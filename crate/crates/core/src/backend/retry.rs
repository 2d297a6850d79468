use std::time::Duration;

use rand::Rng;

use super::BackendError;

/// How an HTTP status is treated by the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusClass {
    Success,
    /// 429 and 5xx.
    Retryable,
    /// 401 and 403; never retried.
    Auth,
    /// Any other 4xx; never retried.
    Client,
}

pub fn classify_status(status: u16) -> StatusClass {
    match status {
        200..=299 => StatusClass::Success,
        401 | 403 => StatusClass::Auth,
        429 => StatusClass::Retryable,
        400..=499 => StatusClass::Client,
        _ => StatusClass::Retryable,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
            jitter: true,
        }
    }
}

/// One failed attempt: either worth retrying or final.
pub(crate) enum AttemptError {
    Transient(String),
    Fatal(BackendError),
}

impl RetryPolicy {
    /// Backoff before attempt `attempt + 1`, given `attempt` (1-based) failed.
    /// Exponential in the attempt number, capped at `max_delay`; with jitter
    /// the delay is drawn from the upper half of that window.
    pub fn delay_after(&self, attempt: u32, rng: &mut impl Rng) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(1u32 << (attempt.saturating_sub(1)).min(20));
        let capped = exp.min(self.max_delay);
        if self.jitter {
            capped.mul_f64(rng.random_range(0.5..=1.0))
        } else {
            capped
        }
    }

    pub(crate) fn run<T>(
        &self,
        mut op: impl FnMut(u32) -> Result<T, AttemptError>,
    ) -> Result<T, BackendError> {
        let attempts = self.max_attempts.max(1);
        let mut rng = rand::rng();
        let mut last = String::new();
        for attempt in 1..=attempts {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Transient(msg)) => {
                    tracing::debug!(attempt, error = %msg, "transient backend failure");
                    last = msg;
                    if attempt < attempts {
                        std::thread::sleep(self.delay_after(attempt, &mut rng));
                    }
                }
            }
        }
        Err(BackendError::Exhausted { attempts, last })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_classes() {
        assert_eq!(classify_status(200), StatusClass::Success);
        assert_eq!(classify_status(401), StatusClass::Auth);
        assert_eq!(classify_status(403), StatusClass::Auth);
        assert_eq!(classify_status(429), StatusClass::Retryable);
        assert_eq!(classify_status(400), StatusClass::Client);
        assert_eq!(classify_status(404), StatusClass::Client);
        assert_eq!(classify_status(408), StatusClass::Client);
        assert_eq!(classify_status(500), StatusClass::Retryable);
        assert_eq!(classify_status(503), StatusClass::Retryable);
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy { jitter: false, ..Default::default() };
        let mut rng = rand::rng();
        assert_eq!(p.delay_after(1, &mut rng), Duration::from_millis(500));
        assert_eq!(p.delay_after(2, &mut rng), Duration::from_millis(1000));
        assert_eq!(p.delay_after(3, &mut rng), Duration::from_millis(2000));
        assert_eq!(p.delay_after(10, &mut rng), Duration::from_secs(8));
    }

    #[test]
    fn jitter_stays_in_window() {
        let p = RetryPolicy::default();
        let mut rng = rand::rng();
        for _ in 0..100 {
            let d = p.delay_after(2, &mut rng);
            assert!(d >= Duration::from_millis(500) && d <= Duration::from_millis(1000));
        }
    }

    #[test]
    fn stops_on_fatal_and_counts_transients() {
        let p = RetryPolicy { base_delay: Duration::ZERO, ..Default::default() };
        let mut calls = 0;
        let r: Result<(), _> = p.run(|_| {
            calls += 1;
            Err(AttemptError::Fatal(BackendError::Auth { status: 401 }))
        });
        assert_eq!(calls, 1);
        assert_eq!(r.unwrap_err(), BackendError::Auth { status: 401 });

        calls = 0;
        let r: Result<(), _> = p.run(|_| {
            calls += 1;
            Err(AttemptError::Transient("503".into()))
        });
        assert_eq!(calls, 3);
        assert!(matches!(r, Err(BackendError::Exhausted { attempts: 3, .. })));

        let r = p.run(|n| if n < 3 { Err(AttemptError::Transient("x".into())) } else { Ok(n) });
        assert_eq!(r.unwrap(), 3);
    }
}
