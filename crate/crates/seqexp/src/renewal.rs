//! The nonlinear-renewal constants A, Ã, B, B̃ that govern the
//! expectation-constraint second-order term.
//!
//! `A = E[R]` and `B = log E[exp(-R)]` where R is the limiting overshoot of
//! the LLR walk over a receding upper boundary under H0; the tilded pair is
//! the same construction for the lower boundary under H1. Two independent
//! routes are provided:
//!
//! - [`constants_series`] evaluates the series representations
//!   `A = E[Y^2]/(2 D) - sum_k (1/k) E[S_k^-]` and
//!   `B = -log D - sum_k (1/k) (P0(S_k<0) + P1(S_k>0))`
//!   (B and B̃ share the identical series, so `B - B̃ = log(D1/D0)` exactly),
//!   truncating each sum once a fitted geometric tail majorant drops below
//!   the requested tolerance.
//! - [`constants_overshoot_mc`] simulates one-sided first passages over a
//!   single large boundary and estimates the same four constants from the
//!   recorded overshoots. It needs nothing but a sampler, so it also serves
//!   custom pairs, and it is the oracle the series route is checked against.

use serde::Serialize;

use crate::mc::{run_trials, MonteCarloEstimate, StreamKey};
use crate::models::{DistributionPair, Hypothesis, MomentSummary};
use crate::{Error, Result};

/// Hard cap on series length; reaching it means the pair is degenerate
/// (vanishing divergence) or effectively arithmetic.
const MAX_TERMS: usize = 200_000;
/// Window for the fitted per-term decay ratio.
const RATIO_WINDOW: usize = 10;

/// The four limiting overshoot constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RenewalConstants {
    /// E[R], mean overshoot over the upper boundary under H0.
    pub a: f64,
    /// E[R̃], mean overshoot under the lower boundary under H1.
    pub a_tilde: f64,
    /// log E[exp(-R)]; nonpositive.
    pub b: f64,
    /// log E[exp(-R̃)]; nonpositive.
    pub b_tilde: f64,
}

/// A truncated series value with the truncation point and a bound on the
/// discarded tail.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesEstimate {
    pub value: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
}

/// Series evaluations of all four constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesConstants {
    pub a: SeriesEstimate,
    pub a_tilde: SeriesEstimate,
    pub b: SeriesEstimate,
    pub b_tilde: SeriesEstimate,
}

impl SeriesConstants {
    pub fn constants(&self) -> RenewalConstants {
        RenewalConstants {
            a: self.a.value,
            a_tilde: self.a_tilde.value,
            b: self.b.value,
            b_tilde: self.b_tilde.value,
        }
    }
}

/// Tracks one series: Kahan sum, sliding term window, geometric tail fit.
struct SeriesTracker {
    sum: f64,
    comp: f64,
    window: Vec<f64>,
    terms_used: usize,
    tail_bound: f64,
    done: bool,
}

impl SeriesTracker {
    fn new() -> Self {
        Self {
            sum: 0.0,
            comp: 0.0,
            window: Vec::with_capacity(RATIO_WINDOW),
            terms_used: 0,
            tail_bound: 0.0,
            done: false,
        }
    }

    fn ratio(&self) -> Option<f64> {
        if self.window.len() < RATIO_WINDOW {
            return None;
        }
        let first = self.window[0];
        let last = self.window[RATIO_WINDOW - 1];
        if !(first > 0.0 && last > 0.0) {
            return None;
        }
        Some((last / first).powf(1.0 / (RATIO_WINDOW as f64 - 1.0)))
    }

    fn push(&mut self, term: f64, tol: f64) {
        debug_assert!(term >= 0.0);
        if self.done {
            return;
        }
        let y = term - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
        self.terms_used += 1;
        if self.window.len() == RATIO_WINDOW {
            self.window.remove(0);
        }
        self.window.push(term);
        if term == 0.0 {
            // exact underflow of the summand; nothing left downstream
            self.tail_bound = 0.0;
            self.done = true;
            return;
        }
        if let Some(r) = self.ratio() {
            if r < 1.0 && term < tol * (1.0 - r) {
                self.tail_bound = term * r / (1.0 - r);
                self.done = true;
            }
        }
    }

    /// Terms needed to converge if the current decay ratio persists.
    fn projected_terms(&self, tol: f64) -> Option<usize> {
        let r = self.ratio()?;
        if r >= 1.0 {
            return None;
        }
        let term = *self.window.last()?;
        let target = tol * (1.0 - r);
        if term <= target {
            return Some(self.terms_used);
        }
        let extra = (target / term).ln() / r.ln();
        Some(self.terms_used + extra.ceil() as usize)
    }

    fn last_term(&self) -> f64 {
        self.window.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Evaluate the series for A, Ã, B, B̃ to within `tol` per series.
///
/// Requires a non-arithmetic pair with closed-form k-step functionals (the
/// two built-in families); custom pairs must use
/// [`constants_overshoot_mc`].
pub fn constants_series(pair: &DistributionPair, tol: f64) -> Result<SeriesConstants> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !pair.is_nonarithmetic() {
        return Err(Error::ArithmeticPair("constants_series"));
    }
    let ms = pair.moments();
    let mut neg = SeriesTracker::new(); // sum_k (1/k) E_{P0}[S_k^-]
    let mut pos = SeriesTracker::new(); // sum_k (1/k) E_{P1}[S_k^+]
    let mut sign = SeriesTracker::new(); // sum_k (1/k)(P0(S_k<0)+P1(S_k>0))

    let mut k: u32 = 0;
    while !(neg.done && pos.done && sign.done) {
        k += 1;
        if k as usize > MAX_TERMS {
            let last = neg.last_term().max(pos.last_term()).max(sign.last_term());
            return Err(Error::ToleranceNotReached {
                tol,
                terms: MAX_TERMS,
                last,
            });
        }
        let f = pair.k_step_functionals(k)?;
        let kf = f64::from(k);
        neg.push(f.neg_part_h0 / kf, tol);
        pos.push(f.pos_part_h1 / kf, tol);
        sign.push(f.sign_prob_sum / kf, tol);

        // every power of two past 512, project the remaining length and
        // bail out if the fitted decay cannot reach tol within the cap
        if k as usize >= 512 && (k & (k - 1)) == 0 {
            for tr in [&neg, &pos, &sign] {
                if tr.done {
                    continue;
                }
                match tr.projected_terms(tol) {
                    Some(n) if n <= MAX_TERMS => {}
                    _ => {
                        return Err(Error::ToleranceNotReached {
                            tol,
                            terms: k as usize,
                            last: tr.last_term(),
                        })
                    }
                }
            }
        }
    }

    let a = SeriesEstimate {
        value: ms.e2_0 / (2.0 * ms.d0) - neg.sum,
        terms_used: neg.terms_used,
        tail_bound: neg.tail_bound,
    };
    let a_tilde = SeriesEstimate {
        value: ms.e2_1 / (2.0 * ms.d1) - pos.sum,
        terms_used: pos.terms_used,
        tail_bound: pos.tail_bound,
    };
    // B and B̃ differ only in the log-divergence offset
    let b = SeriesEstimate {
        value: -ms.d0.ln() - sign.sum,
        terms_used: sign.terms_used,
        tail_bound: sign.tail_bound,
    };
    let b_tilde = SeriesEstimate {
        value: -ms.d1.ln() - sign.sum,
        terms_used: sign.terms_used,
        tail_bound: sign.tail_bound,
    };
    Ok(SeriesConstants {
        a,
        a_tilde,
        b,
        b_tilde,
    })
}

/// Overshoot-simulation estimates of the four constants, with standard
/// errors.
#[derive(Debug, Clone, Serialize)]
pub struct OvershootEstimates {
    pub a: MonteCarloEstimate,
    pub a_tilde: MonteCarloEstimate,
    pub b: MonteCarloEstimate,
    pub b_tilde: MonteCarloEstimate,
    pub boundary: f64,
    pub trials: u64,
    pub warnings: Vec<String>,
}

/// Default boundary for the overshoot oracle: far enough that the overshoot
/// law is at its limit for both walks.
pub fn default_mc_boundary(ms: &MomentSummary) -> f64 {
    100.0 / ms.d0.min(ms.d1)
}

#[derive(Clone, Copy, Default)]
struct PassageAcc {
    n: u64,
    sum_r: f64,
    sum_r2: f64,
    sum_e: f64,
    sum_e2: f64,
    aborted: u64,
}

impl PassageAcc {
    fn merge(mut self, o: Self) -> Self {
        self.n += o.n;
        self.sum_r += o.sum_r;
        self.sum_r2 += o.sum_r2;
        self.sum_e += o.sum_e;
        self.sum_e2 += o.sum_e2;
        self.aborted += o.aborted;
        self
    }
}

/// Simulate one-sided first passages `T(b) = inf{n : S_n > b}` under H0 and
/// `inf{n : -S_n > b}` under H1, recording the boundary overshoots, and
/// estimate `A = E[R]`, `B = log E[exp(-R)]` and the tilded pair.
pub fn constants_overshoot_mc(
    pair: &DistributionPair,
    boundary: f64,
    trials: u64,
    key: StreamKey,
) -> OvershootEstimates {
    assert!(boundary > 0.0 && trials > 0);
    let ms = pair.moments();
    let mut warnings = Vec::new();
    let drift_scale = boundary * ms.d0.min(ms.d1);
    if drift_scale < 10.0 {
        warnings.push(format!(
            "boundary {boundary} is only {drift_scale:.2} mean-drift units; overshoot law may be far from its limit"
        ));
    }

    let run_side = |hyp: Hypothesis, lane: u64| -> PassageAcc {
        let drift = match hyp {
            Hypothesis::H0 => ms.d0,
            Hypothesis::H1 => ms.d1,
        };
        let cap = ((boundary / drift) * 50.0).ceil().max(1000.0) as u64;
        run_trials(
            key.lane(lane),
            trials,
            PassageAcc::default,
            |acc, _t, rng| {
                let mut s = 0.0;
                for _ in 0..cap {
                    let y = pair.sample_llr(hyp, rng);
                    s += match hyp {
                        Hypothesis::H0 => y,
                        Hypothesis::H1 => -y,
                    };
                    if s > boundary {
                        let r = s - boundary;
                        acc.n += 1;
                        acc.sum_r += r;
                        acc.sum_r2 += r * r;
                        let e = (-r).exp();
                        acc.sum_e += e;
                        acc.sum_e2 += e * e;
                        return;
                    }
                }
                acc.aborted += 1;
            },
            PassageAcc::merge,
        )
    };

    let h0 = run_side(Hypothesis::H0, 0);
    let h1 = run_side(Hypothesis::H1, 1);
    for (acc, side) in [(&h0, "H0"), (&h1, "H1")] {
        if acc.aborted > 0 {
            warnings.push(format!(
                "{} aborted passages under {side} (cap hit); excluded from estimates",
                acc.aborted
            ));
        }
    }

    let log_mean = |acc: &PassageAcc| {
        let m = MonteCarloEstimate::from_sums(acc.sum_e, acc.sum_e2, acc.n);
        // standard error of log(mean) by the delta method
        MonteCarloEstimate::from_mean_stderr(m.mean.ln(), m.stderr / m.mean, acc.n)
    };
    OvershootEstimates {
        a: MonteCarloEstimate::from_sums(h0.sum_r, h0.sum_r2, h0.n),
        a_tilde: MonteCarloEstimate::from_sums(h1.sum_r, h1.sum_r2, h1.n),
        b: log_mean(&h0),
        b_tilde: log_mean(&h1),
        boundary,
        trials,
        warnings,
    }
}
