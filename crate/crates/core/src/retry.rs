//! Exponential backoff with jitter, plus request pacing.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Attempts after the first one.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub multiplier: f64,
    /// Relative jitter, e.g. `0.2` for ±20%.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
            multiplier: 2.0,
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    pub fn no_retries() -> Self {
        Self {
            max_retries: 0,
            ..Self::default()
        }
    }

    /// Delay before retry number `retry` (0-based), jitter applied.
    pub fn delay_for<R: Rng + ?Sized>(&self, retry: u32, rng: &mut R) -> Duration {
        let nominal = self.base_delay.as_secs_f64() * self.multiplier.powi(retry as i32);
        let factor = if self.jitter > 0.0 {
            1.0 + rng.gen_range(-self.jitter..=self.jitter)
        } else {
            1.0
        };
        Duration::from_secs_f64((nominal * factor).max(0.0))
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Skips every wait. Used by tests and replay runs.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoSleep;

impl Sleeper for NoSleep {
    fn sleep(&self, _duration: Duration) {}
}

/// Runs `op` until it succeeds, fails permanently, or the retry budget is
/// spent. `op` receives the 0-based attempt number. At most
/// `1 + max_retries` attempts are made.
pub fn with_retries<T, E>(
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
    is_transient: impl Fn(&E) -> bool,
    mut op: impl FnMut(u32) -> Result<T, E>,
) -> Result<T, E> {
    let mut attempt = 0;
    loop {
        match op(attempt) {
            Ok(v) => return Ok(v),
            Err(e) if is_transient(&e) && attempt < policy.max_retries => {
                let delay = policy.delay_for(attempt, &mut rand::thread_rng());
                tracing::debug!(attempt, ?delay, "transient failure, backing off");
                sleeper.sleep(delay);
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Enforces a minimum interval between consecutive requests.
#[derive(Debug)]
pub struct Pacer {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl Pacer {
    pub fn new(min_interval: Duration) -> Self {
        Self {
            min_interval,
            last: Mutex::new(None),
        }
    }

    pub fn wait(&self, sleeper: &dyn Sleeper) {
        if self.min_interval.is_zero() {
            return;
        }
        let mut last = self.last.lock().expect("pacer lock poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                sleeper.sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::mock::StepRng;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct RecordingSleeper(Mutex<Vec<Duration>>);

    impl Sleeper for RecordingSleeper {
        fn sleep(&self, d: Duration) {
            self.0.lock().unwrap().push(d);
        }
    }

    #[test]
    fn delays_double_without_jitter() {
        let policy = RetryPolicy {
            jitter: 0.0,
            ..Default::default()
        };
        let mut rng = StepRng::new(0, 1);
        let d: Vec<f64> = (0..4)
            .map(|i| policy.delay_for(i, &mut rng).as_secs_f64())
            .collect();
        assert_eq!(d, vec![1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn jitter_stays_within_twenty_percent() {
        let policy = RetryPolicy::default();
        let mut rng = rand::thread_rng();
        for retry in 0..4 {
            let nominal = 2f64.powi(retry as i32);
            for _ in 0..200 {
                let d = policy.delay_for(retry, &mut rng).as_secs_f64();
                assert!(
                    d >= nominal * 0.8 - 1e-9 && d <= nominal * 1.2 + 1e-9,
                    "{d}"
                );
            }
        }
    }

    #[test]
    fn gives_up_after_budget() {
        let calls = AtomicU32::new(0);
        let sleeper = RecordingSleeper(Mutex::new(vec![]));
        let policy = RetryPolicy {
            max_retries: 2,
            ..Default::default()
        };
        let out: Result<(), &str> = with_retries(
            &policy,
            &sleeper,
            |_| true,
            |_| {
                calls.fetch_add(1, Ordering::SeqCst);
                Err("down")
            },
        );
        assert_eq!(out, Err("down"));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert_eq!(sleeper.0.lock().unwrap().len(), 2);
    }

    #[test]
    fn permanent_errors_are_not_retried() {
        let calls = AtomicU32::new(0);
        let out: Result<(), &str> = with_retries(
            &RetryPolicy::default(),
            &NoSleep,
            |_| false,
            |_| {
                calls.fetch_add(1, Ordering::SeqCst);
                Err("auth")
            },
        );
        assert!(out.is_err());
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn recovers_after_transient_failures() {
        let out = with_retries(
            &RetryPolicy::default(),
            &NoSleep,
            |_: &&str| true,
            |attempt| {
                if attempt < 2 {
                    Err("429")
                } else {
                    Ok(attempt)
                }
            },
        );
        assert_eq!(out, Ok(2));
    }

    #[test]
    fn pacer_sleeps_between_calls() {
        let sleeper = RecordingSleeper(Mutex::new(vec![]));
        let pacer = Pacer::new(Duration::from_secs(60));
        pacer.wait(&sleeper);
        pacer.wait(&sleeper);
        let slept = sleeper.0.lock().unwrap();
        assert_eq!(slept.len(), 1);
        assert!(slept[0] > Duration::from_secs(59));
    }
}
