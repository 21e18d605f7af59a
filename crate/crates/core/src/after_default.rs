//! Closed forms after the default: the weight `k(theta)^p`, the optimal
//! proportion and the value function, for deterministic coefficients and a
//! default time independent of the stock.
//!
//! The weight is only ever handled through its logarithm
//! `ln k(theta)^p = ln alpha(theta) + p/(2(1-p)) * int_theta^T (mu_d/sigma_d)^2 du`,
//! which stays finite for negative or tiny `p` where `k` itself overflows.

use crate::error::{Error, Result};
use crate::model::{AfterDefaultSchedule, DefaultLaw, MarketSpec, Utility};
use crate::quadrature;
use crate::scalar::Scalar;

/// Closed-form after-default quantities at one default time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfterDefaultPoint<S> {
    pub theta: S,
    /// `ln k(theta)^p`; `-inf` when the density vanishes.
    pub log_kp: S,
    pub pi_d: S,
    /// `int_theta^T (mu_d / sigma_d)^2 (theta, u) du`
    pub b2_integral: S,
}

impl<S: Scalar> AfterDefaultPoint<S> {
    pub fn evaluate(
        market: &MarketSpec<S>,
        law: &DefaultLaw<S>,
        utility: &Utility<S>,
        theta: S,
    ) -> Result<Self> {
        Ok(Self {
            theta,
            log_kp: log_weight(market, law, utility, theta)?,
            pi_d: strategy_after(market, utility, theta)?,
            b2_integral: sharpe_integral(market, theta),
        })
    }
}

/// Integrated squared Sharpe ratio of the after-default market started at `theta`.
pub fn sharpe_integral<S: Scalar>(market: &MarketSpec<S>, theta: S) -> S {
    let horizon = market.horizon;
    let remaining = (horizon - theta).max(S::zero());
    match &market.after {
        AfterDefaultSchedule::Profiles { .. } => {
            let (mu, sigma) = market.after_coefficients(theta);
            let b = mu / sigma;
            b * b * remaining
        }
        AfterDefaultSchedule::TimeVarying(f) => quadrature::integrate(
            |u| {
                let (mu, sigma) = f(theta, u);
                let b = mu / sigma;
                b * b
            },
            theta,
            theta + remaining,
        ),
    }
}

fn check_theta<S: Scalar>(market: &MarketSpec<S>, theta: S) -> Result<()> {
    if theta < S::zero() || theta.is_nan() {
        return Err(Error::NegativeTime {
            what: "theta",
            value: theta.as_f64(),
        });
    }
    if theta > market.horizon {
        return Err(Error::Config(format!(
            "default time {theta} lies beyond the horizon {}",
            market.horizon
        )));
    }
    Ok(())
}

/// `ln k(theta)^p` for power utility.
pub fn log_kp<S: Scalar>(
    market: &MarketSpec<S>,
    law: &DefaultLaw<S>,
    utility: &Utility<S>,
    theta: S,
) -> Result<S> {
    if utility.is_log() {
        return Err(Error::UtilityKind { expected: "power" });
    }
    log_weight(market, law, utility, theta)
}

/// `ln k(theta)^p` for power utility and its `p -> 0` limit `ln alpha(theta)`
/// for log utility.
pub fn log_weight<S: Scalar>(
    market: &MarketSpec<S>,
    law: &DefaultLaw<S>,
    utility: &Utility<S>,
    theta: S,
) -> Result<S> {
    check_theta(market, theta)?;
    let alpha = law.density(theta)?;
    if alpha <= S::zero() {
        return Ok(S::neg_infinity());
    }
    let p = utility.exponent();
    if p == S::zero() {
        return Ok(alpha.ln());
    }
    let b2 = sharpe_integral(market, theta);
    Ok(alpha.ln() + p / (S::lit(2.0) * (S::one() - p)) * b2)
}

/// Optimal after-default proportion `mu_d / ((1-p) sigma_d^2)` at the
/// default time. Does not depend on the density.
pub fn strategy_after<S: Scalar>(market: &MarketSpec<S>, utility: &Utility<S>, theta: S) -> Result<S> {
    strategy_after_at(market, utility, theta, theta)
}

/// Optimal after-default proportion at calendar time `t >= theta`.
pub fn strategy_after_at<S: Scalar>(
    market: &MarketSpec<S>,
    utility: &Utility<S>,
    theta: S,
    t: S,
) -> Result<S> {
    let (mu, sigma) = market.after.coefficients(theta, t, market.horizon);
    if sigma == S::zero() {
        return Err(Error::ZeroVolatility {
            theta: theta.as_f64(),
        });
    }
    Ok(mu / ((S::one() - utility.exponent()) * sigma * sigma))
}

/// After-default value `V^d_theta(x)`, weighted by the density at `theta`.
///
/// Power utility: `U(x) k(theta)^p`. Log utility:
/// `alpha ln(x / alpha) + alpha (ln alpha + b2 / 2) = alpha (ln x + b2 / 2)`.
pub fn value_after<S: Scalar>(
    market: &MarketSpec<S>,
    law: &DefaultLaw<S>,
    utility: &Utility<S>,
    theta: S,
    x: S,
) -> Result<S> {
    if !(x > S::zero()) {
        return Err(Error::NonPositiveWealth { x: x.as_f64() });
    }
    match *utility {
        Utility::Power(p) => {
            let lk = log_weight(market, law, utility, theta)?;
            if lk == S::neg_infinity() {
                return Ok(S::zero());
            }
            let magnitude = (p * x.ln() - p.abs().ln() + lk).exp();
            Ok(if p > S::zero() { magnitude } else { -magnitude })
        }
        Utility::Log => {
            check_theta(market, theta)?;
            let alpha = law.density(theta)?;
            if alpha == S::zero() {
                return Ok(S::zero());
            }
            let b2 = sharpe_integral(market, theta);
            Ok(alpha * (x.ln() + b2 / S::lit(2.0)))
        }
    }
}
