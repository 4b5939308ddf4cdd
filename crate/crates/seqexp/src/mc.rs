//! Deterministic Monte Carlo plumbing: counter-keyed RNG streams and a
//! chunked map/reduce whose result is bit-identical for any worker count.
//!
//! Every trial draws from its own ChaCha8 stream selected by
//! `(seed, stream code, trial index)`, so scheduling can never influence
//! what a trial samples. Trials are processed in fixed-size chunks and the
//! per-chunk accumulators are merged in chunk order, so floating-point
//! reductions are performed in one well-defined order no matter how the
//! chunks were scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Trials per work item. Fixed so that scheduling cannot influence results.
const CHUNK: u64 = 4096;

const LANE_BITS: u32 = 6;
const CODE_BITS: u32 = 20;
const TRIAL_BITS: u32 = 44;

/// Handle for a family of per-trial random streams.
///
/// A key is `(seed, code)` where the code packs a point index and a lane.
/// Point indices address independent experiment points (up to 2^14); lanes
/// separate sampling tasks inside one operation (up to 64). Trial indices
/// may run to 2^44.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    seed: u64,
    code: u64,
}

impl StreamKey {
    pub fn new(seed: u64, point: u64) -> Self {
        assert!(
            point < 1 << (CODE_BITS - LANE_BITS),
            "stream point index {point} out of range"
        );
        Self {
            seed,
            code: point << LANE_BITS,
        }
    }

    /// Select a sampling lane within this point (replaces any current lane).
    pub fn lane(&self, lane: u64) -> Self {
        assert!(lane < 1 << LANE_BITS, "lane {lane} out of range");
        Self {
            seed: self.seed,
            code: (self.code & !((1 << LANE_BITS) - 1)) | lane,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// RNG for one trial: an independent ChaCha8 stream.
    pub fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_of(trial));
        rng
    }

    fn stream_of(&self, trial: u64) -> u64 {
        assert!(trial < 1 << TRIAL_BITS, "trial index {trial} out of range");
        (self.code << TRIAL_BITS) | trial
    }
}

/// Run `trials` independent trials and reduce their accumulators.
///
/// `step` receives a zeroed accumulator per chunk and the trial's private
/// RNG. The reduction order is chunk order, independent of threading.
pub fn run_trials<A, I, S, M>(key: StreamKey, trials: u64, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64, &mut ChaCha8Rng) + Sync,
    M: Fn(A, A) -> A,
{
    let run_chunk = |start: u64| {
        let end = (start + CHUNK).min(trials);
        let template = ChaCha8Rng::seed_from_u64(key.seed);
        let mut acc = init();
        for trial in start..end {
            let mut rng = template.clone();
            rng.set_stream(key.stream_of(trial));
            step(&mut acc, trial, &mut rng);
        }
        acc
    };
    let starts: Vec<u64> = (0..trials).step_by(CHUNK as usize).collect();

    #[cfg(feature = "parallel")]
    let parts: Vec<A> = {
        use rayon::prelude::*;
        starts.into_par_iter().map(run_chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<A> = starts.into_iter().map(run_chunk).collect();

    parts.into_iter().fold(init(), merge)
}

/// Run `f` on a dedicated pool with `workers` threads when the `parallel`
/// feature is active; otherwise just run it.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    if let Some(w) = workers {
        return rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("failed to build worker pool")
            .install(f);
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    f()
}

/// A Monte Carlo point estimate with its standard error and 95% interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

impl MonteCarloEstimate {
    pub fn from_mean_stderr(mean: f64, stderr: f64, trials: u64) -> Self {
        Self {
            mean,
            stderr,
            trials,
            ci95_low: mean - 1.96 * stderr,
            ci95_high: mean + 1.96 * stderr,
        }
    }

    /// Binomial proportion with its exact-binomial standard error.
    pub fn binomial(successes: u64, trials: u64) -> Self {
        let n = trials.max(1) as f64;
        let p = successes as f64 / n;
        Self::from_mean_stderr(p, (p * (1.0 - p) / n).sqrt(), trials)
    }

    /// Sample mean from raw sums; stderr is sample std (n-1) over sqrt(n).
    pub fn from_sums(sum: f64, sum_sq: f64, n: u64) -> Self {
        let nf = n.max(1) as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self::from_mean_stderr(mean, (var / nf).sqrt(), n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let key = StreamKey::new(7, 3);
        let a: f64 = key.trial_rng(0).random();
        let b: f64 = key.trial_rng(0).random();
        let c: f64 = key.trial_rng(1).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let other_lane: f64 = key.lane(1).trial_rng(0).random();
        assert_ne!(a, other_lane);
        let other_point: f64 = StreamKey::new(7, 4).trial_rng(0).random();
        assert_ne!(a, other_point);
    }

    #[test]
    fn lane_replaces_previous_lane() {
        let key = StreamKey::new(1, 5);
        assert_eq!(key.lane(2).lane(3), key.lane(3));
    }

    #[test]
    fn reduction_is_chunk_ordered() {
        // trial indices concatenated in order even across chunk boundaries
        let key = StreamKey::new(0, 0);
        let trials = 3 * CHUNK + 17;
        let ids = run_trials(
            key,
            trials,
            Vec::new,
            |acc: &mut Vec<u64>, t, _rng| acc.push(t),
            |mut a, mut b| {
                a.append(&mut b);
                a
            },
        );
        assert_eq!(ids.len(), trials as usize);
        assert!(ids.windows(2).all(|w| w[0] + 1 == w[1]));
    }

    #[test]
    fn float_reduction_is_deterministic() {
        let key = StreamKey::new(42, 1);
        let run = || {
            run_trials(
                key,
                50_000,
                || 0.0_f64,
                |acc, _t, rng| *acc += rng.random::<f64>(),
                |a, b| a + b,
            )
        };
        let x = run();
        let y = run();
        assert_eq!(x.to_bits(), y.to_bits());
    }

    #[test]
    fn binomial_estimate_matches_definitions() {
        let e = MonteCarloEstimate::binomial(25, 100);
        assert_eq!(e.mean, 0.25);
        assert!((e.stderr - (0.25 * 0.75 / 100.0_f64).sqrt()).abs() < 1e-15);
        assert!((e.ci95_high - e.mean - 1.96 * e.stderr).abs() < 1e-15);
    }
}
