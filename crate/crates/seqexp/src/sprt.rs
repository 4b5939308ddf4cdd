//! The SPRT state machine and the threshold pairs used by the two
//! achievability constructions.
//!
//! A test with parameters `(alpha, beta)` accumulates LLR increments and
//! stops the first time the running sum leaves `[-alpha, beta]`, deciding H0
//! above and H1 below. Exits are strict; a sum landing exactly on a boundary
//! (probability zero for continuous LLRs) keeps sampling. Runs that survive
//! `max_steps` steps come back as `Decision::Truncated` and must be treated
//! as censored by callers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::{DistributionPair, Hypothesis, MomentSummary};
use crate::special::normal_quantile;
use crate::{Error, Result};

/// SPRT boundaries in nats plus a safety cap on the number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SprtConfig {
    /// Lower-boundary magnitude: decide H1 when the sum drops below `-alpha`.
    pub alpha: f64,
    /// Upper boundary: decide H0 when the sum exceeds `beta`.
    pub beta: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

fn default_max_steps() -> u64 {
    1_000_000
}

impl SprtConfig {
    pub fn new(alpha: f64, beta: f64, max_steps: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidThreshold(format!(
                "boundaries must be positive and finite, got alpha={alpha}, beta={beta}"
            )));
        }
        if max_steps == 0 {
            return Err(Error::InvalidThreshold("max_steps must be >= 1".into()));
        }
        Ok(Self {
            alpha,
            beta,
            max_steps,
        })
    }

    /// Symmetric boundaries with a cap of 50x the crossing scale.
    pub fn symmetric(boundary: f64, ms: &MomentSummary) -> Result<Self> {
        let cap = (50.0 * boundary / ms.d0.min(ms.d1)).ceil().max(1000.0) as u64;
        Self::new(boundary, boundary, cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    H0,
    H1,
    /// Hit `max_steps` while still inside `[-alpha, beta]`.
    Truncated,
}

/// One SPRT run.
#[derive(Debug, Clone, Copy)]
pub struct SprtOutcome {
    pub decision: Decision,
    pub stop_time: u64,
    /// The terminal running sum `S_T`.
    pub terminal_llr: f64,
    /// `S_T - beta` after an H0 decision, `-S_T - alpha` after H1, 0 when
    /// truncated.
    pub overshoot: f64,
}

/// Run one SPRT to its stopping time.
pub fn run_sprt<R: Rng + ?Sized>(
    pair: &DistributionPair,
    hypothesis: Hypothesis,
    cfg: &SprtConfig,
    rng: &mut R,
) -> SprtOutcome {
    let mut s = 0.0;
    for n in 1..=cfg.max_steps {
        s += pair.sample_llr(hypothesis, rng);
        if s > cfg.beta {
            return SprtOutcome {
                decision: Decision::H0,
                stop_time: n,
                terminal_llr: s,
                overshoot: s - cfg.beta,
            };
        }
        if s < -cfg.alpha {
            return SprtOutcome {
                decision: Decision::H1,
                stop_time: n,
                terminal_llr: s,
                overshoot: -s - cfg.alpha,
            };
        }
    }
    SprtOutcome {
        decision: Decision::Truncated,
        stop_time: cfg.max_steps,
        terminal_llr: s,
        overshoot: 0.0,
    }
}

/// Threshold pair for the probabilistic constraint `P_i(T > n) <= eps`:
///
/// `alpha_n = n (D1 - c0/sqrt(n))` and `beta_n = n (D0 - c1/sqrt(n))` with
/// `c0 = -sqrt(V1) Qinv(eps - eta)` and `c1 = -sqrt(V0) Qinv(eps - eta)`,
/// where `Qinv` is the normal quantile. `max_steps` defaults to `50 n`.
pub fn thresholds_probabilistic(
    ms: &MomentSummary,
    n: u64,
    eps: f64,
    eta: f64,
) -> Result<SprtConfig> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0,1), got {eps}")));
    }
    if !(eta >= 0.0 && eta < eps) {
        return Err(Error::Domain(format!(
            "eta must lie in [0, eps), got eta={eta}, eps={eps}"
        )));
    }
    let q = normal_quantile(eps - eta)?;
    let c0 = -ms.v1.sqrt() * q;
    let c1 = -ms.v0.sqrt() * q;
    let nf = n as f64;
    let alpha = nf * ms.d1 - nf.sqrt() * c0;
    let beta = nf * ms.d0 - nf.sqrt() * c1;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidThreshold(format!(
            "n = {n} is too small for eps = {eps}: alpha = {alpha}, beta = {beta}"
        )));
    }
    SprtConfig::new(alpha, beta, 50 * n)
}

/// Which of the two expectation-constraint constructions to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdDirection {
    /// `-eta/n` correction; yields `E[T] = n - eta + o(1) <= n`.
    Achievability,
    /// `+eta/n` correction; yields `E[T] >= n + eta/2` for large n.
    Converse,
}

/// Threshold pair for the expectation constraint `E_i[T] <= n`:
///
/// achievability uses `alpha_n = n D1 - Atilde - eta D1` and
/// `beta_n = n D0 - A - eta D0`; the converse flips the sign of the eta
/// terms. `A`/`Atilde` are the limiting mean overshoots.
pub fn thresholds_expectation(
    ms: &MomentSummary,
    a: f64,
    a_tilde: f64,
    n: u64,
    eta: f64,
    direction: ThresholdDirection,
) -> Result<SprtConfig> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let sign = match direction {
        ThresholdDirection::Achievability => -1.0,
        ThresholdDirection::Converse => 1.0,
    };
    let nf = n as f64;
    let alpha = nf * ms.d1 - a_tilde + sign * eta * ms.d1;
    let beta = nf * ms.d0 - a + sign * eta * ms.d0;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidThreshold(format!(
            "n = {n} is too small: alpha = {alpha}, beta = {beta}"
        )));
    }
    SprtConfig::new(alpha, beta, 50 * n)
}

/// Change-of-measure error bounds for any SPRT: `P(decide H1 | H0) <=
/// exp(-alpha)` and `P(decide H0 | H1) <= exp(-beta)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WaldBounds {
    pub p10_bound: f64,
    pub p01_bound: f64,
}

pub fn wald_error_bounds(cfg: &SprtConfig) -> WaldBounds {
    WaldBounds {
        p10_bound: (-cfg.alpha).exp(),
        p01_bound: (-cfg.beta).exp(),
    }
}
