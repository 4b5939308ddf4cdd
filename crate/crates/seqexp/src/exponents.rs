//! First- and second-order error-exponent calculators.
//!
//! Under the probabilistic constraint `max_i P_i(T > n) <= eps` the optimal
//! backoff from the corner point `(D1, D0)` is of order `1/sqrt(n)` with
//! constant `G(lambda, eps)`; under the expectation constraint
//! `max_i E_i[T] <= n` it is of order `1/n` with constant `F(lambda)`.
//! Reports carry a normalization marker so values on the two scales cannot
//! be compared by accident.
//!
//! A note on the variance pairing in `G`: the type-I weight `lambda`
//! multiplies `sqrt(V(P1||P0))`, matching the threshold construction (the
//! type-I boundary is built from `V(P1||P0)`) and the converse bounds that
//! attach each variance to its own error type.

use serde::Serialize;

use crate::models::MomentSummary;
use crate::renewal::RenewalConstants;
use crate::special::normal_quantile;
use crate::{Error, Result};

/// Which sample-size constraint a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "constraint", rename_all = "lowercase")]
pub enum Constraint {
    Probabilistic { eps: f64 },
    Expectation,
}

/// Scale of the second-order term: `1/sqrt(n)` for the probabilistic
/// constraint, `1/n` for the expectation constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    PerSqrtN,
    PerUnit,
}

/// A lambda-weighted exponent pair: first-order value plus the second-order
/// correction under the named constraint.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExponentReport {
    #[serde(flatten)]
    pub constraint: Constraint,
    pub lambda: f64,
    /// `lambda D1 + (1 - lambda) D0`, nats.
    pub first_order: f64,
    /// `G(lambda, eps)` or `F(lambda)` depending on the constraint.
    pub second_order: f64,
    pub normalization: Normalization,
}

/// The boundary of the achievable exponent region: given a type-I exponent
/// `e0 > 0`, the largest compatible type-II exponent is `D1 D0 / e0`.
pub fn achievable_region_boundary(ms: &MomentSummary, e0: f64) -> Result<f64> {
    if e0.is_nan() || e0 <= 0.0 {
        return Err(Error::Domain(format!("e0 must be positive, got {e0}")));
    }
    Ok(ms.d1 * ms.d0 / e0)
}

/// Second-order term under the probabilistic constraint:
/// `G(lambda, eps) = lambda sqrt(V1) Qinv(eps) + (1-lambda) sqrt(V0) Qinv(eps)`.
pub fn second_order_probabilistic(
    ms: &MomentSummary,
    lambda: f64,
    eps: f64,
) -> Result<ExponentReport> {
    check_lambda(lambda)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0,1), got {eps}")));
    }
    let q = normal_quantile(eps)?;
    let g = lambda * ms.v1.sqrt() * q + (1.0 - lambda) * ms.v0.sqrt() * q;
    Ok(ExponentReport {
        constraint: Constraint::Probabilistic { eps },
        lambda,
        first_order: lambda * ms.d1 + (1.0 - lambda) * ms.d0,
        second_order: g,
        normalization: Normalization::PerSqrtN,
    })
}

/// Second-order term under the expectation constraint:
/// `F(lambda) = lambda (Ã + B̃) + (1-lambda) (A + B)`.
pub fn second_order_expectation(
    ms: &MomentSummary,
    rc: &RenewalConstants,
    lambda: f64,
) -> Result<ExponentReport> {
    check_lambda(lambda)?;
    for v in [rc.a, rc.a_tilde, rc.b, rc.b_tilde] {
        if !v.is_finite() {
            return Err(Error::Domain("renewal constants must be finite".into()));
        }
    }
    let f = lambda * (rc.a_tilde + rc.b_tilde) + (1.0 - lambda) * (rc.a + rc.b);
    Ok(ExponentReport {
        constraint: Constraint::Expectation,
        lambda,
        first_order: lambda * ms.d1 + (1.0 - lambda) * ms.d0,
        second_order: f,
        normalization: Normalization::PerUnit,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "lambda must lie in [0,1], got {lambda}"
        )));
    }
    Ok(())
}
