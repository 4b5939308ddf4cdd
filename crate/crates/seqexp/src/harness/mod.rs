//! Monte Carlo verification engine: error-probability and stopping-time
//! estimation, plus direct checks of the testable asymptotic statements
//! (Wald's bound, the expected-sample-size and error-probability limits,
//! the change-of-measure inequality, and the maximal-sum CLT).
//!
//! Everything is driven by [`StreamKey`]s: per-trial substreams make every
//! estimate a pure function of `(seed, point, trial)`, so results are
//! bit-identical for any worker count.

mod plan;

pub use crate::mc::MonteCarloEstimate;
pub use plan::{
    plan_report_csv, run_plan, ExperimentPlan, HypothesisSelect, PlanPoint, PlanReport, PointRow,
    ProbabilisticPoint, RawThresholds,
};

use serde::Serialize;

use crate::mc::{run_trials, StreamKey};
use crate::models::{DistributionPair, Hypothesis};
use crate::renewal::RenewalConstants;
use crate::special::normal_cdf;
use crate::sprt::{run_sprt, Decision, SprtConfig};

/// Minimum observed error events before an error-probability estimate is
/// considered reliable.
const MIN_ERROR_EVENTS: u64 = 25;

/// An error-probability estimate with its censoring bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorProbEstimate {
    /// Fraction of decided runs that decided against the true hypothesis.
    pub error_prob: MonteCarloEstimate,
    pub decided: u64,
    pub truncated: u64,
    pub trials: u64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Default)]
struct ErrAcc {
    wrong: u64,
    truncated: u64,
}

/// Estimate `P(decide != hypothesis)` for one SPRT configuration.
///
/// Truncated runs are excluded from the numerator and denominator but
/// reported; they censor the estimate rather than count as errors.
pub fn estimate_error_probs(
    pair: &DistributionPair,
    cfg: &SprtConfig,
    hypothesis: Hypothesis,
    trials: u64,
    key: StreamKey,
) -> ErrorProbEstimate {
    let acc = run_trials(
        key,
        trials,
        ErrAcc::default,
        |acc, _t, rng| {
            let out = run_sprt(pair, hypothesis, cfg, rng);
            match (out.decision, hypothesis) {
                (Decision::Truncated, _) => acc.truncated += 1,
                (Decision::H1, Hypothesis::H0) | (Decision::H0, Hypothesis::H1) => {
                    acc.wrong += 1
                }
                _ => {}
            }
        },
        |mut a, b| {
            a.wrong += b.wrong;
            a.truncated += b.truncated;
            a
        },
    );
    let decided = trials - acc.truncated;
    let mut warnings = Vec::new();
    if acc.wrong < MIN_ERROR_EVENTS {
        warnings.push(format!(
            "only {} error events observed; estimate unreliable",
            acc.wrong
        ));
    }
    ErrorProbEstimate {
        error_prob: MonteCarloEstimate::binomial(acc.wrong, decided.max(1)),
        decided,
        truncated: acc.truncated,
        trials,
        warnings,
    }
}

/// Empirical `P(T > n)` at one requested n.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailEstimate {
    pub n: u64,
    pub prob: MonteCarloEstimate,
}

/// Stopping-time summary: sample mean of T plus requested tail points.
#[derive(Debug, Clone, Serialize)]
pub struct StoppingEstimate {
    pub mean: MonteCarloEstimate,
    pub tails: Vec<TailEstimate>,
    pub truncated: u64,
    pub trials: u64,
}

#[derive(Clone)]
struct StopAcc {
    sum_t: u64,
    sum_t2: u128,
    tail_counts: Vec<u64>,
    truncated: u64,
}

/// Estimate `E[T]` and `P(T > n)` for the requested n values.
pub fn estimate_stopping(
    pair: &DistributionPair,
    cfg: &SprtConfig,
    hypothesis: Hypothesis,
    trials: u64,
    tail_at: &[u64],
    key: StreamKey,
) -> StoppingEstimate {
    let acc = run_trials(
        key,
        trials,
        || StopAcc {
            sum_t: 0,
            sum_t2: 0,
            tail_counts: vec![0; tail_at.len()],
            truncated: 0,
        },
        |acc, _t, rng| {
            let out = run_sprt(pair, hypothesis, cfg, rng);
            acc.sum_t += out.stop_time;
            acc.sum_t2 += u128::from(out.stop_time) * u128::from(out.stop_time);
            for (i, n) in tail_at.iter().enumerate() {
                if out.stop_time > *n {
                    acc.tail_counts[i] += 1;
                }
            }
            if out.decision == Decision::Truncated {
                acc.truncated += 1;
            }
        },
        |mut a, b| {
            a.sum_t += b.sum_t;
            a.sum_t2 += b.sum_t2;
            for (x, y) in a.tail_counts.iter_mut().zip(&b.tail_counts) {
                *x += y;
            }
            a.truncated += b.truncated;
            a
        },
    );
    StoppingEstimate {
        mean: MonteCarloEstimate::from_sums(acc.sum_t as f64, acc.sum_t2 as f64, trials),
        tails: tail_at
            .iter()
            .zip(&acc.tail_counts)
            .map(|(n, c)| TailEstimate {
                n: *n,
                prob: MonteCarloEstimate::binomial(*c, trials),
            })
            .collect(),
        truncated: acc.truncated,
        trials,
    }
}

/// One boundary of the error-probability convergence check.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub boundary: f64,
    pub trials: u64,
    /// `P(decide H1 | H0) * exp(boundary)`; converges to `exp(b_tilde)`.
    pub normalized_p10: MonteCarloEstimate,
    pub target_p10: f64,
    /// `P(decide H0 | H1) * exp(boundary)`; converges to `exp(b)`.
    pub normalized_p01: MonteCarloEstimate,
    pub target_p01: f64,
    pub truncated: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub warnings: Vec<String>,
}

/// Check the error-probability limits `P(decide H1 | H0) e^alpha ->
/// exp(b_tilde)` and `P(decide H0 | H1) e^beta -> exp(b)` along a schedule
/// of symmetric boundaries, with `ceil(trials_base * exp(boundary))` trials
/// per point so the expected error count stays roughly constant.
pub fn check_theorem5_convergence(
    pair: &DistributionPair,
    rc: &RenewalConstants,
    boundaries: &[f64],
    trials_base: u64,
    key: StreamKey,
) -> ConvergenceReport {
    assert!(boundaries.len() <= 32, "at most 32 boundaries per key");
    let ms = pair.moments();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (i, &b) in boundaries.iter().enumerate() {
        let trials = (trials_base as f64 * b.exp()).ceil() as u64;
        if (trials as f64) * (-b).exp() < 100.0 {
            warnings.push(format!(
                "boundary {b}: fewer than 100 expected error events; ratio will be noisy"
            ));
        }
        let cfg = SprtConfig::symmetric(b, &ms).expect("positive boundary");
        let scale = b.exp();
        let p10 = estimate_error_probs(
            pair,
            &cfg,
            Hypothesis::H0,
            trials,
            key.lane(2 * i as u64),
        );
        let p01 = estimate_error_probs(
            pair,
            &cfg,
            Hypothesis::H1,
            trials,
            key.lane(2 * i as u64 + 1),
        );
        rows.push(ConvergenceRow {
            boundary: b,
            trials,
            normalized_p10: MonteCarloEstimate::from_mean_stderr(
                p10.error_prob.mean * scale,
                p10.error_prob.stderr * scale,
                trials,
            ),
            target_p10: rc.b_tilde.exp(),
            normalized_p01: MonteCarloEstimate::from_mean_stderr(
                p01.error_prob.mean * scale,
                p01.error_prob.stderr * scale,
                trials,
            ),
            target_p01: rc.b.exp(),
            truncated: p10.truncated + p01.truncated,
        });
    }
    // flag sequences that drift away from the limit instead of toward it
    if rows.len() >= 2 {
        let dev = |r: &ConvergenceRow| {
            ((r.normalized_p10.mean - r.target_p10) / r.target_p10).abs()
                + ((r.normalized_p01.mean - r.target_p01) / r.target_p01).abs()
        };
        if dev(rows.last().unwrap()) > dev(&rows[0]) {
            warnings.push("normalized error sequence is moving away from its limit".into());
        }
    }
    ConvergenceReport { rows, warnings }
}

/// Result of the maximal-sum CLT check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RogozinReport {
    pub n: u64,
    pub trials: u64,
    /// sup over the grid of |ECDF - Phi| for the standardized prefix max.
    pub sup_distance: f64,
}

/// Simulate `max_{k<=n} S_k` under H0, standardize by `(n D0, sqrt(n V0))`,
/// and measure the sup distance between its empirical CDF and the standard
/// normal over the grid `[-6, 6]` with step 0.01.
pub fn check_rogozin(
    pair: &DistributionPair,
    n: u64,
    trials: u64,
    key: StreamKey,
) -> RogozinReport {
    let ms = pair.moments();
    assert!(ms.d0 > 0.0, "positive drift under H0 required");
    let center = n as f64 * ms.d0;
    let spread = (n as f64 * ms.v0).sqrt();
    let mut samples = run_trials(
        key,
        trials,
        Vec::new,
        |acc: &mut Vec<f64>, _t, rng| {
            let mut s = 0.0;
            let mut max = f64::NEG_INFINITY;
            for _ in 0..n {
                s += pair.sample_llr(Hypothesis::H0, rng);
                if s > max {
                    max = s;
                }
            }
            acc.push((max - center) / spread);
        },
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    );
    samples.sort_by(f64::total_cmp);
    let nf = trials as f64;
    let mut sup = 0.0_f64;
    let mut grid = -6.0_f64;
    while grid <= 6.0 {
        let ecdf = samples.partition_point(|z| *z <= grid) as f64 / nf;
        sup = sup.max((ecdf - normal_cdf(grid)).abs());
        grid += 0.01;
    }
    RogozinReport {
        n,
        trials,
        sup_distance: sup,
    }
}

/// Both sides of the change-of-measure inequality
/// `P0(E) - gamma P1(E) <= P0(S_T >= log gamma)` with E the decide-H0 event.
#[derive(Debug, Clone, Serialize)]
pub struct Lemma1Check {
    pub gamma: f64,
    /// `P0(E) - gamma P1(E)` with combined standard error.
    pub lhs: MonteCarloEstimate,
    /// `P0(S_T >= log gamma)`.
    pub rhs: MonteCarloEstimate,
    pub p0_e: MonteCarloEstimate,
    pub p1_e: MonteCarloEstimate,
    /// `rhs - lhs`; the inequality predicts this is nonnegative up to noise.
    pub slack: f64,
}

#[derive(Clone, Copy, Default)]
struct LemmaAcc {
    decide_h0: u64,
    terminal_above: u64,
}

/// Estimate both sides of the inequality under a shared key.
pub fn check_lemma1(
    pair: &DistributionPair,
    cfg: &SprtConfig,
    gamma: f64,
    trials: u64,
    key: StreamKey,
) -> Lemma1Check {
    assert!(gamma > 0.0);
    let log_gamma = gamma.ln();
    let under = |hyp: Hypothesis, lane: u64| {
        run_trials(
            key.lane(lane),
            trials,
            LemmaAcc::default,
            |acc, _t, rng| {
                let out = run_sprt(pair, hyp, cfg, rng);
                if out.decision == Decision::H0 {
                    acc.decide_h0 += 1;
                }
                if out.terminal_llr >= log_gamma {
                    acc.terminal_above += 1;
                }
            },
            |mut a, b| {
                a.decide_h0 += b.decide_h0;
                a.terminal_above += b.terminal_above;
                a
            },
        )
    };
    let h0 = under(Hypothesis::H0, 0);
    let h1 = under(Hypothesis::H1, 1);
    let p0_e = MonteCarloEstimate::binomial(h0.decide_h0, trials);
    let p1_e = MonteCarloEstimate::binomial(h1.decide_h0, trials);
    let rhs = MonteCarloEstimate::binomial(h0.terminal_above, trials);
    let lhs = MonteCarloEstimate::from_mean_stderr(
        p0_e.mean - gamma * p1_e.mean,
        (p0_e.stderr.powi(2) + gamma * gamma * p1_e.stderr.powi(2)).sqrt(),
        trials,
    );
    Lemma1Check {
        gamma,
        slack: rhs.mean - lhs.mean,
        lhs,
        rhs,
        p0_e,
        p1_e,
    }
}
