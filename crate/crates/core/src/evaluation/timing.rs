use std::time::{Duration, Instant};

use serde::Serialize;

use super::EvalError;
use crate::raster::ImageRaster;
use crate::segmentation::SegmentationEngine;

/// Time source for [`time_inference`]; injectable so tests are deterministic.
pub trait Clock {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Where a timing run happened. No cross-machine comparison is implied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            os: std::env::consts::OS.to_owned(),
            arch: std::env::consts::ARCH.to_owned(),
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub mean_ms: f64,
    /// Sample standard deviation (n - 1); zero for a single run.
    pub std_ms: f64,
    pub n: usize,
    pub environment: Environment,
}

impl TimingReport {
    pub fn from_samples(samples_ms: &[f64]) -> Result<Self, EvalError> {
        if samples_ms.is_empty() {
            return Err(EvalError::EmptyInput("no timing samples".into()));
        }
        let n = samples_ms.len();
        let mean = samples_ms.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (samples_ms.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(TimingReport {
            mean_ms: mean,
            std_ms: std,
            n,
            environment: Environment::current(),
        })
    }
}

/// Wall-clock time per `predict` call. `warmups` calls run first and are not
/// recorded; run `i` uses `inputs[i % inputs.len()]`.
pub fn time_inference(
    engine: &SegmentationEngine,
    inputs: &[ImageRaster],
    warmups: usize,
    runs: usize,
    clock: &dyn Clock,
) -> Result<TimingReport, EvalError> {
    if runs == 0 {
        return Err(EvalError::EmptyInput("runs must be >= 1".into()));
    }
    if inputs.is_empty() {
        return Err(EvalError::EmptyInput("no inputs to time".into()));
    }
    for i in 0..warmups {
        engine.predict(&inputs[i % inputs.len()])?;
    }
    let mut samples = Vec::with_capacity(runs);
    for i in 0..runs {
        let img = &inputs[i % inputs.len()];
        let start = clock.now();
        engine.predict(img)?;
        let end = clock.now();
        samples.push(end.saturating_sub(start).as_secs_f64() * 1e3);
    }
    TimingReport::from_samples(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::ClassicalIndex;
    use std::cell::RefCell;

    struct ScriptedClock {
        ticks: RefCell<std::vec::IntoIter<u64>>,
    }

    impl ScriptedClock {
        fn new(ms: Vec<u64>) -> Self {
            ScriptedClock {
                ticks: RefCell::new(ms.into_iter()),
            }
        }
    }

    impl Clock for ScriptedClock {
        fn now(&self) -> Duration {
            Duration::from_millis(self.ticks.borrow_mut().next().expect("clock script exhausted"))
        }
    }

    fn engine() -> SegmentationEngine {
        SegmentationEngine::classical("c", ClassicalIndex::default())
    }

    fn inputs() -> Vec<ImageRaster> {
        vec![ImageRaster::filled_rgb(4, 4, [10, 20, 30]).unwrap()]
    }

    #[test]
    fn injected_deltas() {
        let clock = ScriptedClock::new(vec![0, 10, 100, 120, 500, 530]);
        let r = time_inference(&engine(), &inputs(), 2, 3, &clock).unwrap();
        assert_eq!(r.n, 3);
        assert!((r.mean_ms - 20.0).abs() < 1e-12);
        assert!((r.std_ms - 10.0).abs() < 1e-12);
    }

    #[test]
    fn single_run_has_zero_std() {
        let clock = ScriptedClock::new(vec![5, 9]);
        let r = time_inference(&engine(), &inputs(), 0, 1, &clock).unwrap();
        assert_eq!(r.std_ms, 0.0);
        assert_eq!(r.mean_ms, 4.0);
    }

    #[test]
    fn real_clock_runs() {
        let r = time_inference(&engine(), &inputs(), 1, 4, &MonotonicClock::default()).unwrap();
        assert_eq!(r.n, 4);
        assert!(r.mean_ms >= 0.0);
        assert!(time_inference(&engine(), &inputs(), 0, 0, &MonotonicClock::default()).is_err());
        assert!(time_inference(&engine(), &[], 0, 1, &MonotonicClock::default()).is_err());
    }
}
