//! Hypothesis pairs (P0, P1): log-likelihood-ratio sampling under either
//! hypothesis, information-theoretic moments, and the closed-form k-step
//! sum functionals used by the renewal series.
//!
//! Two worked families are built in. For unit-variance Gaussians with means
//! `theta0`, `theta1` the LLR is `(theta1^2 - theta0^2)/2 + (theta0 -
//! theta1) X`, so the k-step sum `S_k` is itself Gaussian and everything is
//! expressible through the normal cdf/pdf. For exponentials with rates
//! `gamma0 < gamma1` the LLR is `(gamma1 - gamma0) X + log(gamma0/gamma1)`
//! and `S_k` is an affine function of an Erlang variable, so the k-step
//! functionals reduce to Erlang CDF evaluations.
//!
//! `custom` pairs give a finite LLR distribution directly: `probs0[j] =
//! P0(Y = support[j])` while P1 is forced to `probs0[j] * exp(-support[j])`,
//! which is exactly the tilt a genuine density pair induces on its LLR.

use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::special::{erlang_cdf, erlang_sf, normal_cdf, normal_pdf};
use crate::{Error, Result};

/// Which hypothesis generates the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    H0,
    H1,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hypothesis::H0 => write!(f, "H0"),
            Hypothesis::H1 => write!(f, "H1"),
        }
    }
}

/// Serializable description of a hypothesis pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PairSpec {
    /// Unit-variance Gaussians with distinct means.
    Gaussian { theta0: f64, theta1: f64 },
    /// Exponentials with rates `gamma0 < gamma1`.
    Exponential { gamma0: f64, gamma1: f64 },
    /// Finite LLR distribution; `arithmetic_span = Some(d)` declares the
    /// support to lie on the lattice d*Z, absent means non-arithmetic.
    Custom {
        support: Vec<f64>,
        probs0: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arithmetic_span: Option<f64>,
    },
}

/// Relative entropies, LLR variances and higher moments of a pair.
///
/// Sign convention: the LLR has mean `d0` under P0 and mean `-d1` under P1,
/// so `e2_i = v_i + d_i^2` for both hypotheses.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentSummary {
    /// D(P0 || P1), nats.
    pub d0: f64,
    /// D(P1 || P0), nats.
    pub d1: f64,
    /// V(P0 || P1), LLR variance under P0.
    pub v0: f64,
    /// V(P1 || P0), LLR variance under P1.
    pub v1: f64,
    /// E_{P0} |Y|^3.
    pub m3_0: f64,
    /// E_{P1} |Y|^3.
    pub m3_1: f64,
    /// E_{P0} Y^2.
    pub e2_0: f64,
    /// E_{P1} Y^2.
    pub e2_1: f64,
}

/// Closed-form functionals of the k-step sum `S_k`.
#[derive(Debug, Clone, Copy)]
pub struct KStepFunctionals {
    /// P0(S_k < 0) + P1(S_k > 0).
    pub sign_prob_sum: f64,
    /// E_{P0}[S_k^-] (nonnegative).
    pub neg_part_h0: f64,
    /// E_{P1}[S_k^+] (nonnegative).
    pub pos_part_h1: f64,
}

#[derive(Debug, Clone)]
enum Sampler {
    Gaussian {
        theta0: f64,
        theta1: f64,
        shift: f64,
        scale: f64,
    },
    Exponential {
        exp0: Exp<f64>,
        exp1: Exp<f64>,
        rate_gap: f64,
        log_ratio: f64,
    },
    Custom {
        support: Vec<f64>,
        cum0: Vec<f64>,
        cum1: Vec<f64>,
    },
}

/// A validated hypothesis pair with precomputed moments and samplers.
#[derive(Debug, Clone)]
pub struct DistributionPair {
    spec: PairSpec,
    moments: MomentSummary,
    sampler: Sampler,
}

impl DistributionPair {
    pub fn new(spec: PairSpec) -> Result<Self> {
        match &spec {
            PairSpec::Gaussian { theta0, theta1 } => {
                if !theta0.is_finite() || !theta1.is_finite() {
                    return Err(Error::InvalidPair("gaussian means must be finite".into()));
                }
                if theta0 == theta1 {
                    return Err(Error::InvalidPair(
                        "gaussian means must be distinct".into(),
                    ));
                }
                let dt = theta1 - theta0;
                let d = dt * dt / 2.0;
                let v = dt * dt;
                let moments = MomentSummary {
                    d0: d,
                    d1: d,
                    v0: v,
                    v1: v,
                    m3_0: normal_abs_third_moment(d, dt.abs()),
                    m3_1: normal_abs_third_moment(d, dt.abs()),
                    e2_0: v + d * d,
                    e2_1: v + d * d,
                };
                let sampler = Sampler::Gaussian {
                    theta0: *theta0,
                    theta1: *theta1,
                    shift: (theta1 * theta1 - theta0 * theta0) / 2.0,
                    scale: theta0 - theta1,
                };
                Ok(Self { spec, moments, sampler })
            }
            PairSpec::Exponential { gamma0, gamma1 } => {
                if !(gamma0.is_finite() && gamma1.is_finite() && *gamma0 > 0.0 && *gamma1 > 0.0) {
                    return Err(Error::InvalidPair(
                        "exponential rates must be positive and finite".into(),
                    ));
                }
                if gamma0 >= gamma1 {
                    return Err(Error::InvalidPair(
                        "exponential pair requires gamma0 < gamma1".into(),
                    ));
                }
                let (g0, g1) = (*gamma0, *gamma1);
                let gap = g1 - g0; // LLR = gap * X + log(g0/g1)
                let b = (g0 / g1).ln();
                let d0 = b + gap / g0;
                let d1 = -b - gap / g1;
                let v0 = (gap / g0) * (gap / g0);
                let v1 = (gap / g1) * (gap / g1);
                let moments = MomentSummary {
                    d0,
                    d1,
                    v0,
                    v1,
                    m3_0: exp_abs_third_moment(gap, b, g0)?,
                    m3_1: exp_abs_third_moment(gap, b, g1)?,
                    e2_0: v0 + d0 * d0,
                    e2_1: v1 + d1 * d1,
                };
                let sampler = Sampler::Exponential {
                    exp0: Exp::new(g0).expect("validated rate"),
                    exp1: Exp::new(g1).expect("validated rate"),
                    rate_gap: gap,
                    log_ratio: b,
                };
                Ok(Self { spec, moments, sampler })
            }
            PairSpec::Custom {
                support,
                probs0,
                arithmetic_span,
            } => {
                let (moments, sampler) =
                    build_custom(support, probs0, *arithmetic_span)?;
                Ok(Self { spec, moments, sampler })
            }
        }
    }

    pub fn gaussian(theta0: f64, theta1: f64) -> Result<Self> {
        Self::new(PairSpec::Gaussian { theta0, theta1 })
    }

    pub fn exponential(gamma0: f64, gamma1: f64) -> Result<Self> {
        Self::new(PairSpec::Exponential { gamma0, gamma1 })
    }

    pub fn spec(&self) -> &PairSpec {
        &self.spec
    }

    pub fn label(&self) -> String {
        match &self.spec {
            PairSpec::Gaussian { theta0, theta1 } => format!("gaussian({theta0},{theta1})"),
            PairSpec::Exponential { gamma0, gamma1 } => {
                format!("exponential({gamma0},{gamma1})")
            }
            PairSpec::Custom { support, .. } => format!("custom({} atoms)", support.len()),
        }
    }

    /// One i.i.d. LLR draw under the given hypothesis.
    pub fn sample_llr<R: Rng + ?Sized>(&self, hypothesis: Hypothesis, rng: &mut R) -> f64 {
        match &self.sampler {
            Sampler::Gaussian {
                theta0,
                theta1,
                shift,
                scale,
            } => {
                let mean = match hypothesis {
                    Hypothesis::H0 => *theta0,
                    Hypothesis::H1 => *theta1,
                };
                let z: f64 = rng.sample(StandardNormal);
                shift + scale * (mean + z)
            }
            Sampler::Exponential {
                exp0,
                exp1,
                rate_gap,
                log_ratio,
            } => {
                let x = match hypothesis {
                    Hypothesis::H0 => rng.sample(*exp0),
                    Hypothesis::H1 => rng.sample(*exp1),
                };
                rate_gap * x + log_ratio
            }
            Sampler::Custom { support, cum0, cum1 } => {
                let cum = match hypothesis {
                    Hypothesis::H0 => cum0,
                    Hypothesis::H1 => cum1,
                };
                let u: f64 = rng.random();
                let idx = cum.partition_point(|&c| c < u).min(support.len() - 1);
                support[idx]
            }
        }
    }

    pub fn moments(&self) -> MomentSummary {
        self.moments
    }

    /// Closed-form `P0(S_k<0) + P1(S_k>0)`, `E_{P0}[S_k^-]`, `E_{P1}[S_k^+]`.
    ///
    /// Only the Gaussian and exponential families have closed forms; custom
    /// pairs must use the Monte Carlo overshoot estimator instead.
    pub fn k_step_functionals(&self, k: u32) -> Result<KStepFunctionals> {
        if k == 0 {
            return Err(Error::Domain("k must be >= 1".into()));
        }
        match &self.spec {
            PairSpec::Gaussian { theta0, theta1 } => {
                let sd = (theta1 - theta0).abs();
                let kf = f64::from(k);
                // S_k ~ N(k sd^2/2, k sd^2) under H0, mirrored under H1
                let mu = kf * sd * sd / 2.0;
                let sigma = kf.sqrt() * sd;
                let m = sigma / 2.0; // = mu/sigma
                let neg = (sigma * normal_pdf(m) - mu * normal_cdf(-m)).max(0.0);
                Ok(KStepFunctionals {
                    sign_prob_sum: 2.0 * normal_cdf(-m),
                    neg_part_h0: neg,
                    pos_part_h1: neg,
                })
            }
            PairSpec::Exponential { gamma0, gamma1 } => {
                let (g0, g1) = (*gamma0, *gamma1);
                let gap = g1 - g0;
                let lr = (g1 / g0).ln();
                let kf = f64::from(k);
                // S_k < 0 iff the Erlang(k) part is below t
                let t = kf * lr / gap;
                let cdf0 = erlang_cdf(t, k, g0)?;
                let sf1 = erlang_sf(t, k, g1)?;
                let neg =
                    (kf * lr * cdf0 - (kf * gap / g0) * erlang_cdf(t, k + 1, g0)?).max(0.0);
                let pos =
                    ((kf * gap / g1) * erlang_sf(t, k + 1, g1)? - kf * lr * sf1).max(0.0);
                Ok(KStepFunctionals {
                    sign_prob_sum: cdf0 + sf1,
                    neg_part_h0: neg,
                    pos_part_h1: pos,
                })
            }
            PairSpec::Custom { .. } => Err(Error::UnsupportedPair),
        }
    }

    /// Whether the LLR avoids every lattice d*Z. True for the continuous
    /// built-in families; custom pairs pass their declaration through.
    pub fn is_nonarithmetic(&self) -> bool {
        match &self.spec {
            PairSpec::Gaussian { .. } | PairSpec::Exponential { .. } => true,
            PairSpec::Custom { arithmetic_span, .. } => arithmetic_span.is_none(),
        }
    }
}

/// E|Z|^3 for Z ~ N(mu, sigma^2).
fn normal_abs_third_moment(mu: f64, sigma: f64) -> f64 {
    let m = mu / sigma;
    (mu.powi(3) + 3.0 * mu * sigma * sigma) * (2.0 * normal_cdf(m) - 1.0)
        + 2.0 * sigma.powi(3) * (2.0 + m * m) * normal_pdf(m)
}

/// E|c X + b|^3 for X ~ Exp(g), c > 0, b < 0.
fn exp_abs_third_moment(c: f64, b: f64, g: f64) -> Result<f64> {
    // E[X^j 1{X<=t}] = (j!/g^j) U(t; j+1, g); binomial expansion of (cX+b)^3
    let t = -b / c;
    let factorials = [1.0, 1.0, 2.0, 6.0];
    let choose = [1.0, 3.0, 3.0, 1.0];
    let mut whole = 0.0; // E[(cX+b)^3]
    let mut below = 0.0; // E[(cX+b)^3 1{X <= t}]
    for j in 0..=3usize {
        let coeff = choose[j] * c.powi(j as i32) * b.powi(3 - j as i32);
        let raw = factorials[j] / g.powi(j as i32);
        whole += coeff * raw;
        below += coeff * raw * erlang_cdf(t, j as u32 + 1, g)?;
    }
    // |y|^3 = y^3 - 2 y^3 1{y<0}
    Ok(whole - 2.0 * below)
}

fn build_custom(
    support: &[f64],
    probs0: &[f64],
    span: Option<f64>,
) -> Result<(MomentSummary, Sampler)> {
    if support.is_empty() || support.len() != probs0.len() {
        return Err(Error::InvalidPair(
            "custom pair needs equal-length non-empty support and probs0".into(),
        ));
    }
    if support.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidPair("custom support must be finite".into()));
    }
    if probs0.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidPair("custom probs0 must be nonnegative".into()));
    }
    let total0: f64 = probs0.iter().sum();
    if (total0 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidPair(format!(
            "custom probs0 must sum to 1, got {total0}"
        )));
    }
    let p0: Vec<f64> = probs0.iter().map(|p| p / total0).collect();
    // the tilted measure P1(y) = P0(y) e^{-y} must itself be a distribution
    let tilted: Vec<f64> = support.iter().zip(&p0).map(|(y, p)| p * (-y).exp()).collect();
    let total1: f64 = tilted.iter().sum();
    if (total1 - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidPair(format!(
            "custom pair is not a consistent LLR: sum of probs0*exp(-y) is {total1}, want 1"
        )));
    }
    let p1: Vec<f64> = tilted.iter().map(|p| p / total1).collect();
    if let Some(d) = span {
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::InvalidPair("arithmetic span must be positive".into()));
        }
        for y in support {
            let m = (y / d).round();
            if (y - m * d).abs() > 1e-9 * d.max(1.0) {
                return Err(Error::InvalidPair(format!(
                    "support point {y} is not a multiple of the declared span {d}"
                )));
            }
        }
    }

    let mean = |p: &[f64], f: &dyn Fn(f64) -> f64| -> f64 {
        support.iter().zip(p).map(|(y, q)| q * f(*y)).sum()
    };
    let d0 = mean(&p0, &|y| y);
    let d1 = -mean(&p1, &|y| y);
    if !(d0 > 0.0 && d1 > 0.0) {
        return Err(Error::InvalidPair(format!(
            "relative entropies must be strictly positive, got D0={d0}, D1={d1}"
        )));
    }
    let e2_0 = mean(&p0, &|y| y * y);
    let e2_1 = mean(&p1, &|y| y * y);
    let moments = MomentSummary {
        d0,
        d1,
        v0: e2_0 - d0 * d0,
        v1: e2_1 - d1 * d1,
        m3_0: mean(&p0, &|y| y.abs().powi(3)),
        m3_1: mean(&p1, &|y| y.abs().powi(3)),
        e2_0,
        e2_1,
    };
    let cumulate = |p: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        let mut cum: Vec<f64> = p
            .iter()
            .map(|q| {
                acc += q;
                acc
            })
            .collect();
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        cum
    };
    let sampler = Sampler::Custom {
        support: support.to_vec(),
        cum0: cumulate(&p0),
        cum1: cumulate(&p1),
    };
    Ok((moments, sampler))
}

/// A symmetric two-point arithmetic pair with LLR values `{+d, -d}`; handy
/// as the canonical lattice example in tests and docs.
pub fn two_point_pair(d: f64) -> Result<DistributionPair> {
    let q = 1.0 / (1.0 + (-d).exp()); // makes probs0 * exp(-y) sum to 1
    DistributionPair::new(PairSpec::Custom {
        support: vec![d, -d],
        probs0: vec![q, 1.0 - q],
        arithmetic_span: Some(d),
    })
}

#[cfg(test)]
mod tests {
    #![allow(clippy::excessive_precision)] // frozen oracle values quoted in full

    use super::*;
    use crate::mc::{run_trials, MonteCarloEstimate, StreamKey};

    fn gauss01() -> DistributionPair {
        DistributionPair::gaussian(0.0, 1.0).unwrap()
    }

    fn exp12() -> DistributionPair {
        DistributionPair::exponential(1.0, 2.0).unwrap()
    }

    #[test]
    fn gaussian_moments_exact() {
        let ms = gauss01().moments();
        assert_eq!(ms.d0, 0.5);
        assert_eq!(ms.d1, 0.5);
        assert_eq!(ms.v0, 1.0);
        assert_eq!(ms.v1, 1.0);
        assert_eq!(ms.e2_0, 1.25);
        assert_eq!(ms.e2_1, 1.25);
        // offline quadrature oracle for E|Y|^3, Y ~ N(1/2, 1)
        assert!((ms.m3_0 - 2.206_546_969_579_890_2).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments_scale_with_mean_gap() {
        let ms = DistributionPair::gaussian(0.0, 0.001).unwrap().moments();
        assert!((ms.d0 - 5e-7).abs() < 1e-20);
        assert!((ms.v0 - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn exponential_moments_match_closed_forms() {
        let ms = exp12().moments();
        assert!((ms.d0 - (1.0 - std::f64::consts::LN_2)).abs() < 1e-15);
        assert!((ms.d1 - (std::f64::consts::LN_2 - 0.5)).abs() < 1e-15);
        assert!((ms.v0 - 1.0).abs() < 1e-15);
        assert!((ms.v1 - 0.25).abs() < 1e-15);
        // offline oracle values
        assert!((ms.e2_0 - 1.094_158_652_798_310_8).abs() < 1e-14);
        assert!((ms.e2_1 - 0.287_305_833_358_256_1).abs() < 1e-14);
        assert!((ms.m3_0 - 3.050_548_693_593_997).abs() < 1e-12);
        assert!((ms.m3_1 - 0.277_065_901_951_545_3).abs() < 1e-12);
    }

    #[test]
    fn sign_convention_e2_equals_v_plus_d_squared() {
        for pair in [gauss01(), exp12(), two_point_pair(0.8).unwrap()] {
            let ms = pair.moments();
            assert!((ms.e2_0 - (ms.v0 + ms.d0 * ms.d0)).abs() < 1e-12);
            assert!((ms.e2_1 - (ms.v1 + ms.d1 * ms.d1)).abs() < 1e-12);
        }
    }

    /// Empirical mean/variance/E[Y^2]/E|Y|^3 of sampled LLRs against the
    /// summary, each within 5 standard errors.
    fn check_sampling_against_moments(pair: &DistributionPair, point: u64) {
        const TRIALS: u64 = 1_000_000;
        let ms = pair.moments();
        for (hyp, lane, d, v, e2, m3) in [
            (Hypothesis::H0, 0, ms.d0, ms.v0, ms.e2_0, ms.m3_0),
            (Hypothesis::H1, 1, -ms.d1, ms.v1, ms.e2_1, ms.m3_1),
        ] {
            let key = StreamKey::new(0x5EED, point).lane(lane);
            // raw power sums: y, y^2, |y|^3, y^3, y^4, y^6
            let sums = run_trials(
                key,
                TRIALS,
                || [0.0_f64; 6],
                |acc, _t, rng| {
                    let y = pair.sample_llr(hyp, rng);
                    acc[0] += y;
                    acc[1] += y * y;
                    acc[2] += y.abs().powi(3);
                    acc[3] += y.powi(3);
                    acc[4] += y.powi(4);
                    acc[5] += y.powi(6);
                },
                |mut a, b| {
                    for i in 0..6 {
                        a[i] += b[i];
                    }
                    a
                },
            );
            let n = TRIALS as f64;
            let mean = MonteCarloEstimate::from_sums(sums[0], sums[1], TRIALS);
            assert!(
                (mean.mean - d).abs() <= 5.0 * mean.stderr,
                "{} {hyp}: mean {} vs {d} (se {})",
                pair.label(),
                mean.mean,
                mean.stderr
            );
            let e2_hat = MonteCarloEstimate::from_sums(sums[1], sums[4], TRIALS);
            assert!(
                (e2_hat.mean - e2).abs() <= 5.0 * e2_hat.stderr,
                "{} {hyp}: E[Y^2] {} vs {e2}",
                pair.label(),
                e2_hat.mean
            );
            let m3_hat = MonteCarloEstimate::from_sums(sums[2], sums[5], TRIALS);
            assert!(
                (m3_hat.mean - m3).abs() <= 5.0 * m3_hat.stderr,
                "{} {hyp}: E|Y|^3 {} vs {m3}",
                pair.label(),
                m3_hat.mean
            );
            // sample variance; se from the fourth central moment:
            // Var(s^2) ~ (mu4 - var^2)/n
            let m1 = sums[0] / n;
            let m2 = sums[1] / n;
            let m3r = sums[3] / n;
            let m4r = sums[4] / n;
            let var_hat = m2 - m1 * m1;
            let mu4 = m4r - 4.0 * m1 * m3r + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
            let se_var = ((mu4 - var_hat * var_hat).max(0.0) / n).sqrt();
            assert!(
                (var_hat - v).abs() <= 5.0 * se_var.max(1e-12),
                "{} {hyp}: var {} vs {v} (se {})",
                pair.label(),
                var_hat,
                se_var
            );
        }
    }

    #[test]
    fn gaussian_sampling_matches_moments() {
        check_sampling_against_moments(&gauss01(), 1);
    }

    #[test]
    fn exponential_sampling_matches_moments() {
        check_sampling_against_moments(&exp12(), 2);
    }

    #[test]
    fn custom_sampling_matches_moments() {
        check_sampling_against_moments(&two_point_pair(1.0).unwrap(), 3);
    }

    #[test]
    fn gaussian_k_step_examples() {
        let pair = gauss01();
        let k1 = pair.k_step_functionals(1).unwrap();
        // 2 Phi(-1/2), frozen from the offline oracle
        assert!((k1.sign_prob_sum - 0.617_075_077_451_973_8).abs() < 1e-12);
        // sigma phi(1/2) - mu Phi(-1/2)
        assert!((k1.neg_part_h0 - 0.197_796_557_401_306_03).abs() < 1e-12);
        assert_eq!(k1.neg_part_h0, k1.pos_part_h1);

        let k400 = pair.k_step_functionals(400).unwrap();
        assert!(k400.sign_prob_sum < 1e-22);
    }

    #[test]
    fn exponential_k_step_example() {
        // 1 + U(log2;1,1) - U(log2;1,2) = 3/4
        let k1 = exp12().k_step_functionals(1).unwrap();
        assert!((k1.sign_prob_sum - 0.75).abs() < 1e-12);
        // E_{P0}[S_1^-] and E_{P1}[S_1^+], frozen from the offline oracle
        assert!((k1.neg_part_h0 - 0.193_147_180_559_945_3).abs() < 1e-12);
        assert!((k1.pos_part_h1 - 0.125).abs() < 1e-12);
    }

    #[test]
    fn k_step_rejects_custom_and_zero() {
        assert!(matches!(
            two_point_pair(1.0).unwrap().k_step_functionals(3),
            Err(Error::UnsupportedPair)
        ));
        assert!(gauss01().k_step_functionals(0).is_err());
    }

    /// Closed-form k-step functionals against Monte Carlo along shared
    /// trajectories of length 20, every k, 10^6 trajectories per family.
    fn check_k_step_against_mc(pair: &DistributionPair, point: u64) {
        const KMAX: usize = 20;
        const TRIALS: u64 = 1_000_000;
        #[derive(Clone)]
        struct Acc {
            neg_sum: [f64; KMAX],
            neg_sq: [f64; KMAX],
            sign_h0: [u64; KMAX],
            pos_sum: [f64; KMAX],
            pos_sq: [f64; KMAX],
            sign_h1: [u64; KMAX],
        }
        let zero = || Acc {
            neg_sum: [0.0; KMAX],
            neg_sq: [0.0; KMAX],
            sign_h0: [0; KMAX],
            pos_sum: [0.0; KMAX],
            pos_sq: [0.0; KMAX],
            sign_h1: [0; KMAX],
        };
        let acc = run_trials(
            StreamKey::new(0xBEEF, point),
            TRIALS,
            zero,
            |acc, _t, rng| {
                let mut s0 = 0.0;
                let mut s1 = 0.0;
                for k in 0..KMAX {
                    s0 += pair.sample_llr(Hypothesis::H0, rng);
                    s1 += pair.sample_llr(Hypothesis::H1, rng);
                    if s0 < 0.0 {
                        acc.sign_h0[k] += 1;
                        acc.neg_sum[k] += -s0;
                        acc.neg_sq[k] += s0 * s0;
                    }
                    if s1 > 0.0 {
                        acc.sign_h1[k] += 1;
                        acc.pos_sum[k] += s1;
                        acc.pos_sq[k] += s1 * s1;
                    }
                }
            },
            |mut a, b| {
                for k in 0..KMAX {
                    a.neg_sum[k] += b.neg_sum[k];
                    a.neg_sq[k] += b.neg_sq[k];
                    a.sign_h0[k] += b.sign_h0[k];
                    a.pos_sum[k] += b.pos_sum[k];
                    a.pos_sq[k] += b.pos_sq[k];
                    a.sign_h1[k] += b.sign_h1[k];
                }
                a
            },
        );
        let mut prev_neg = f64::INFINITY;
        for k in 1..=KMAX {
            let cf = pair.k_step_functionals(k as u32).unwrap();
            assert!(cf.neg_part_h0 >= 0.0 && (0.0..=1.0).contains(&(cf.sign_prob_sum / 2.0)));
            // E[S_k^-] peaks at small k (k=2 Gaussian, k=4 exponential) and
            // decays rapidly beyond
            if k >= 5 {
                assert!(cf.neg_part_h0 <= prev_neg + 1e-12, "E[S_k^-] not decaying at k={k}");
            }
            prev_neg = cf.neg_part_h0;

            let i = k - 1;
            let p_sign =
                MonteCarloEstimate::binomial(acc.sign_h0[i] + acc.sign_h1[i], 2 * TRIALS);
            // the two indicators are independent; binomial se on the sum/2 scale
            let want = cf.sign_prob_sum / 2.0;
            assert!(
                (p_sign.mean - want).abs() <= 5.0 * p_sign.stderr.max(1e-9),
                "{} k={k}: sign prob {} vs {}",
                pair.label(),
                p_sign.mean,
                want
            );
            let neg = MonteCarloEstimate::from_sums(acc.neg_sum[i], acc.neg_sq[i], TRIALS);
            assert!(
                (neg.mean - cf.neg_part_h0).abs() <= 5.0 * neg.stderr.max(1e-9),
                "{} k={k}: E[S_k^-] {} vs {}",
                pair.label(),
                neg.mean,
                cf.neg_part_h0
            );
            let pos = MonteCarloEstimate::from_sums(acc.pos_sum[i], acc.pos_sq[i], TRIALS);
            assert!(
                (pos.mean - cf.pos_part_h1).abs() <= 5.0 * pos.stderr.max(1e-9),
                "{} k={k}: E[S_k^+] {} vs {}",
                pair.label(),
                pos.mean,
                cf.pos_part_h1
            );
        }
        // rapid decay well past the peak
        let at5 = pair.k_step_functionals(5).unwrap().neg_part_h0;
        let at20 = pair.k_step_functionals(20).unwrap().neg_part_h0;
        assert!(at20 < at5);
    }

    #[test]
    fn gaussian_k_step_matches_mc() {
        check_k_step_against_mc(&gauss01(), 4);
    }

    #[test]
    fn exponential_k_step_matches_mc() {
        check_k_step_against_mc(&exp12(), 5);
    }

    #[test]
    fn arithmetic_declaration_passthrough() {
        assert!(gauss01().is_nonarithmetic());
        assert!(exp12().is_nonarithmetic());
        assert!(!two_point_pair(0.5).unwrap().is_nonarithmetic());
        // same support without a declared span counts as non-arithmetic
        let q = 1.0 / (1.0 + (-0.5_f64).exp());
        let pair = DistributionPair::new(PairSpec::Custom {
            support: vec![0.5, -0.5],
            probs0: vec![q, 1.0 - q],
            arithmetic_span: None,
        })
        .unwrap();
        assert!(pair.is_nonarithmetic());
    }

    #[test]
    fn invalid_pairs_are_rejected() {
        assert!(DistributionPair::gaussian(1.0, 1.0).is_err());
        assert!(DistributionPair::exponential(2.0, 1.0).is_err());
        assert!(DistributionPair::exponential(0.0, 1.0).is_err());
        // inconsistent tilt: probs0 * exp(-y) does not sum to 1
        assert!(DistributionPair::new(PairSpec::Custom {
            support: vec![1.0, -1.0],
            probs0: vec![0.5, 0.5],
            arithmetic_span: None,
        })
        .is_err());
        // declared span that the support does not honor
        assert!(DistributionPair::new(PairSpec::Custom {
            support: vec![1.0, -0.7],
            probs0: vec![0.5, 0.5],
            arithmetic_span: Some(1.0),
        })
        .is_err());
    }

    #[test]
    fn pair_spec_round_trips_through_json() {
        let spec: PairSpec =
            serde_json::from_str(r#"{"kind":"gaussian","theta0":0,"theta1":1}"#).unwrap();
        assert_eq!(
            spec,
            PairSpec::Gaussian {
                theta0: 0.0,
                theta1: 1.0
            }
        );
        let back = serde_json::to_string(&spec).unwrap();
        let again: PairSpec = serde_json::from_str(&back).unwrap();
        assert_eq!(spec, again);
        // unknown fields rejected
        assert!(serde_json::from_str::<PairSpec>(
            r#"{"kind":"gaussian","theta0":0,"theta1":1,"bogus":3}"#
        )
        .is_err());
    }
}
