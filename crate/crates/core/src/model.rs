//! Market coefficients, default-time law and utility, with admissibility
//! checks and the survival / density / intensity evaluations every solver
//! builds on.

use std::fmt;
use std::io::Read;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result, Violation};
use crate::scalar::Scalar;

/// CRRA utility `x^p / p`, or its `p -> 0` limit `ln x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility<S> {
    Power(S),
    Log,
}

impl<S: Scalar> Utility<S> {
    /// Exponent `p`; zero for log utility.
    pub fn exponent(&self) -> S {
        match *self {
            Utility::Power(p) => p,
            Utility::Log => S::zero(),
        }
    }

    /// Conjugate exponent `q = p / (1 - p)`.
    pub fn conjugate(&self) -> S {
        let p = self.exponent();
        p / (S::one() - p)
    }

    pub fn is_log(&self) -> bool {
        matches!(self, Utility::Log)
    }

    pub fn eval(&self, x: S) -> S {
        match *self {
            Utility::Power(p) => x.powf(p) / p,
            Utility::Log => x.ln(),
        }
    }
}

/// Deterministic coefficient profile as a function of the default time,
/// parametrised by `theta / T`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile<S> {
    Constant { value: S },
    /// `start + (end - start) * theta / T`
    Linear { start: S, end: S },
}

impl<S: Scalar> Profile<S> {
    pub fn at(&self, theta: S, horizon: S) -> S {
        match *self {
            Profile::Constant { value } => value,
            Profile::Linear { start, end } => start + (end - start) * theta / horizon,
        }
    }
}

/// Coefficient function `(theta, t) -> (mu_d, sigma_d)`.
pub type CoefficientFn<S> = Arc<dyn Fn(S, S) -> (S, S) + Send + Sync>;

/// After-default drift and volatility.
#[derive(Clone)]
pub enum AfterDefaultSchedule<S> {
    /// Coefficients depend on the default time only.
    Profiles {
        drift: Profile<S>,
        volatility: Profile<S>,
    },
    /// Coefficients depend on the default time and on calendar time.
    TimeVarying(CoefficientFn<S>),
}

impl<S: Scalar> AfterDefaultSchedule<S> {
    /// Drift rising linearly from zero to `mu_f` and volatility falling
    /// linearly from `2 sigma_f` to `sigma_f` as the default time moves
    /// from 0 to the horizon.
    pub fn converging(mu_f: S, sigma_f: S) -> Self {
        AfterDefaultSchedule::Profiles {
            drift: Profile::Linear {
                start: S::zero(),
                end: mu_f,
            },
            volatility: Profile::Linear {
                start: sigma_f + sigma_f,
                end: sigma_f,
            },
        }
    }

    pub fn constant(mu_d: S, sigma_d: S) -> Self {
        AfterDefaultSchedule::Profiles {
            drift: Profile::Constant { value: mu_d },
            volatility: Profile::Constant { value: sigma_d },
        }
    }

    pub fn time_varying(f: impl Fn(S, S) -> (S, S) + Send + Sync + 'static) -> Self {
        AfterDefaultSchedule::TimeVarying(Arc::new(f))
    }

    pub fn is_time_homogeneous(&self) -> bool {
        matches!(self, AfterDefaultSchedule::Profiles { .. })
    }

    /// `(mu_d(theta, t), sigma_d(theta, t))`.
    pub fn coefficients(&self, theta: S, t: S, horizon: S) -> (S, S) {
        match self {
            AfterDefaultSchedule::Profiles { drift, volatility } => {
                (drift.at(theta, horizon), volatility.at(theta, horizon))
            }
            AfterDefaultSchedule::TimeVarying(f) => f(theta, t),
        }
    }
}

impl<S: fmt::Debug> fmt::Debug for AfterDefaultSchedule<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AfterDefaultSchedule::Profiles { drift, volatility } => f
                .debug_struct("Profiles")
                .field("drift", drift)
                .field("volatility", volatility)
                .finish(),
            AfterDefaultSchedule::TimeVarying(_) => f.write_str("TimeVarying(<fn>)"),
        }
    }
}

/// Stock and wealth dynamics before and after the counterparty default.
#[derive(Debug, Clone)]
pub struct MarketSpec<S> {
    pub mu_f: S,
    pub sigma_f: S,
    /// Proportional loss of the stock at the default time.
    pub gamma: S,
    pub after: AfterDefaultSchedule<S>,
    pub horizon: S,
    pub x0: S,
}

impl<S: Scalar> MarketSpec<S> {
    /// Market with the converging after-default schedule.
    pub fn new(mu_f: S, sigma_f: S, gamma: S, horizon: S, x0: S) -> Self {
        Self {
            mu_f,
            sigma_f,
            gamma,
            after: AfterDefaultSchedule::converging(mu_f, sigma_f),
            horizon,
            x0,
        }
    }

    pub fn with_after(mut self, after: AfterDefaultSchedule<S>) -> Self {
        self.after = after;
        self
    }

    pub fn with_gamma(mut self, gamma: S) -> Self {
        self.gamma = gamma;
        self
    }

    /// `(mu_d(theta), sigma_d(theta))` at the start of the after-default period.
    pub fn after_coefficients(&self, theta: S) -> (S, S) {
        self.after.coefficients(theta, theta, self.horizon)
    }

    /// Upper limit `1/gamma` on the proportion invested; infinite when gamma = 0.
    pub fn proportion_cap(&self) -> S {
        if self.gamma > S::zero() {
            S::one() / self.gamma
        } else {
            S::infinity()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureRule {
    /// Trapezoid on the supplied grid; exact for the piecewise-linear density.
    #[default]
    Trapezoid,
}

/// Density supplied on a grid and linearly interpolated between nodes. Zero
/// outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity<S> {
    theta: Vec<S>,
    alpha: Vec<S>,
    // prefix[i] = integral of alpha over [theta_0, theta_i]
    prefix: Vec<S>,
    rule: QuadratureRule,
}

impl<S: Scalar> TabulatedDensity<S> {
    pub fn new(theta: Vec<S>, alpha: Vec<S>) -> Result<Self> {
        let mut violations = Vec::new();
        if theta.len() != alpha.len() {
            violations.push(Violation::new("theta", "theta and alpha must have equal length"));
        }
        if theta.len() < 2 {
            violations.push(Violation::new("theta", "at least two grid points are required"));
        }
        if theta.iter().any(|t| !t.is_finite() || *t < S::zero()) {
            violations.push(Violation::new("theta", "grid times must be finite and nonnegative"));
        }
        if theta.windows(2).any(|w| !(w[0] < w[1])) {
            violations.push(Violation::new("theta", "grid must be strictly increasing"));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < S::zero()) {
            violations.push(Violation::new("alpha", "density values must be finite and nonnegative"));
        }
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let half = S::lit(0.5);
        let mut prefix = Vec::with_capacity(theta.len());
        prefix.push(S::zero());
        for i in 1..theta.len() {
            let seg = (theta[i] - theta[i - 1]) * (alpha[i] + alpha[i - 1]) * half;
            prefix.push(prefix[i - 1] + seg);
        }
        let tab = Self {
            theta,
            alpha,
            prefix,
            rule: QuadratureRule::Trapezoid,
        };
        if tab.mass() > S::one() + S::lit(1e-12) {
            return Err(Error::Validation(vec![Violation::new(
                "alpha",
                format!("total density mass {} exceeds 1", tab.mass()),
            )]));
        }
        Ok(tab)
    }

    /// Reads a `theta,alpha` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Config(format!("density csv: {e}")))?
            .clone();
        if headers.len() != 2 || &headers[0] != "theta" || &headers[1] != "alpha" {
            return Err(Error::Config(
                "density csv: header must be `theta,alpha`".to_string(),
            ));
        }
        let mut theta = Vec::new();
        let mut alpha = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Config(format!("density csv: {e}")))?;
            let parse = |s: &str| -> Result<S> {
                s.parse::<f64>().map(S::lit).map_err(|_| {
                    Error::Config(format!("density csv row {}: cannot parse `{s}`", line + 2))
                })
            };
            theta.push(parse(&rec[0])?);
            alpha.push(parse(&rec[1])?);
        }
        Self::new(theta, alpha)
    }

    pub fn grid(&self) -> &[S] {
        &self.theta
    }

    pub fn values(&self) -> &[S] {
        &self.alpha
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    /// Total mass carried by the grid.
    pub fn mass(&self) -> S {
        *self.prefix.last().unwrap()
    }

    // index i with theta[i] <= t < theta[i+1], or None outside the grid
    fn segment(&self, t: S) -> Option<usize> {
        let n = self.theta.len();
        if t < self.theta[0] || t > self.theta[n - 1] {
            return None;
        }
        let i = self.theta.partition_point(|x| *x <= t);
        Some(i.saturating_sub(1).min(n - 2))
    }

    pub fn density(&self, theta: S) -> S {
        match self.segment(theta) {
            None => S::zero(),
            Some(i) => {
                if theta == self.theta[i] {
                    return self.alpha[i];
                }
                if theta == self.theta[i + 1] {
                    return self.alpha[i + 1];
                }
                let w = (theta - self.theta[i]) / (self.theta[i + 1] - self.theta[i]);
                self.alpha[i] + w * (self.alpha[i + 1] - self.alpha[i])
            }
        }
    }

    /// Integral of the density over `[0, t]`.
    pub fn cumulative(&self, t: S) -> S {
        let n = self.theta.len();
        if t <= self.theta[0] {
            return S::zero();
        }
        if t >= self.theta[n - 1] {
            return self.mass();
        }
        let i = self.segment(t).unwrap();
        let partial = (t - self.theta[i]) * (self.alpha[i] + self.density(t)) * S::lit(0.5);
        self.prefix[i] + partial
    }

    /// Integral of the density over `[t, theta_max]`.
    pub fn tail(&self, t: S) -> S {
        let n = self.theta.len();
        if t >= self.theta[n - 1] {
            return S::zero();
        }
        if t <= self.theta[0] {
            return self.mass();
        }
        let i = self.segment(t).unwrap();
        let partial =
            (self.theta[i + 1] - t) * (self.alpha[i + 1] + self.density(t)) * S::lit(0.5);
        (self.mass() - self.prefix[i + 1]) + partial
    }

    /// Time `t` with `cumulative(t) = u`, or `None` when `u` is at least the
    /// grid mass (the default falls beyond the grid).
    pub fn inverse_cumulative(&self, u: S) -> Option<S> {
        if !(u >= S::zero()) || u >= self.mass() {
            return None;
        }
        // first node whose prefix exceeds u
        let j = self.prefix.partition_point(|c| *c <= u);
        let i = j.saturating_sub(1).min(self.theta.len() - 2);
        let target = u - self.prefix[i];
        let a0 = self.alpha[i];
        let h = self.theta[i + 1] - self.theta[i];
        let slope = (self.alpha[i + 1] - a0) / h;
        // a0 s + slope s^2 / 2 = target on s in [0, h]
        let s = if slope == S::zero() {
            if a0 == S::zero() {
                S::zero()
            } else {
                target / a0
            }
        } else {
            let disc = a0 * a0 + S::lit(2.0) * slope * target;
            // stable form of (-a0 + sqrt(disc)) / slope
            S::lit(2.0) * target / (a0 + disc.max(S::zero()).sqrt())
        };
        Some(self.theta[i] + s.max(S::zero()).min(h))
    }
}

/// Law of the default time `tau`, independent of the stock's Brownian motion.
#[derive(Debug, Clone, PartialEq)]
pub enum DefaultLaw<S> {
    /// Density `lambda exp(-lambda theta)`.
    Exponential { lambda: S },
    Tabulated(TabulatedDensity<S>),
}

fn check_time<S: Scalar>(what: &'static str, t: S) -> Result<()> {
    if t < S::zero() || t.is_nan() {
        Err(Error::NegativeTime {
            what,
            value: t.as_f64(),
        })
    } else {
        Ok(())
    }
}

impl<S: Scalar> DefaultLaw<S> {
    pub fn exponential(lambda: S) -> Self {
        DefaultLaw::Exponential { lambda }
    }

    /// `G(t) = P[tau > t]`. Mass missing from a tabulated grid is treated as
    /// default beyond the horizon.
    pub fn survival(&self, t: S) -> Result<S> {
        check_time("t", t)?;
        Ok(match self {
            DefaultLaw::Exponential { lambda } => (-*lambda * t).exp(),
            DefaultLaw::Tabulated(tab) => ((S::one() - tab.mass()) + tab.tail(t)).max(S::zero()),
        })
    }

    pub fn density(&self, theta: S) -> Result<S> {
        check_time("theta", theta)?;
        Ok(match self {
            DefaultLaw::Exponential { lambda } => *lambda * (-*lambda * theta).exp(),
            DefaultLaw::Tabulated(tab) => tab.density(theta),
        })
    }

    /// Hazard rate `alpha(t) / G(t)`.
    pub fn intensity(&self, t: S) -> Result<S> {
        check_time("t", t)?;
        if let DefaultLaw::Exponential { lambda } = self {
            return Ok(*lambda);
        }
        let g = self.survival(t)?;
        if g <= S::zero() {
            return Err(Error::SurvivalExhausted { t: t.as_f64() });
        }
        Ok(self.density(t)? / g)
    }

    /// `P[tau <= horizon]`.
    pub fn default_probability(&self, horizon: S) -> Result<S> {
        check_time("T", horizon)?;
        Ok(match self {
            DefaultLaw::Exponential { lambda } => -(-*lambda * horizon).exp_m1(),
            DefaultLaw::Tabulated(tab) => tab.cumulative(horizon),
        })
    }

    /// Inverse-CDF draw of the default time from a uniform `u` in `(0, 1)`.
    /// `None` means the default never happens.
    pub fn sample_default_time(&self, u: S) -> Option<S> {
        match self {
            DefaultLaw::Exponential { lambda } => {
                if *lambda <= S::zero() {
                    None
                } else {
                    Some(-u.ln() / *lambda)
                }
            }
            // u -> 1 - u keeps the map increasing in the same direction as the
            // exponential branch's -ln(u)
            DefaultLaw::Tabulated(tab) => tab.inverse_cumulative(S::one() - u),
        }
    }
}

/// Market, default law and utility that passed [`validate`].
#[derive(Debug, Clone)]
pub struct Validated<S> {
    pub market: MarketSpec<S>,
    pub law: DefaultLaw<S>,
    pub utility: Utility<S>,
}

const SCHEDULE_CHECK_POINTS: usize = 65;

/// Checks every admissibility condition and returns the inputs unchanged.
/// All violations are reported together.
pub fn validate<S: Scalar>(
    market: MarketSpec<S>,
    law: DefaultLaw<S>,
    utility: Utility<S>,
) -> Result<Validated<S>> {
    let mut v = Vec::new();
    let zero = S::zero();
    if !market.mu_f.is_finite() {
        v.push(Violation::new("mu_F", "before-default drift must be finite"));
    }
    if !(market.sigma_f > zero) || !market.sigma_f.is_finite() {
        v.push(Violation::new("sigma_F", "before-default volatility must be > 0"));
    }
    if !(market.gamma >= zero) {
        v.push(Violation::new("gamma", "loss given default must be >= 0"));
    } else if !(market.gamma < S::one()) {
        v.push(Violation::new("gamma", "loss given default must be < 1"));
    }
    let horizon_ok = market.horizon > zero && market.horizon.is_finite();
    if !horizon_ok {
        v.push(Violation::new("T", "horizon must be > 0"));
    }
    if !(market.x0 > zero) || !market.x0.is_finite() {
        v.push(Violation::new("X0", "initial wealth must be > 0"));
    }
    if horizon_ok {
        let n = SCHEDULE_CHECK_POINTS - 1;
        let step = market.horizon / S::lit(n as f64);
        let mut bad_mu = false;
        let mut bad_sigma = false;
        for i in 0..=n {
            let theta = step * S::lit(i as f64);
            let times: Vec<S> = if market.after.is_time_homogeneous() {
                vec![theta]
            } else {
                (i..=n).map(|j| step * S::lit(j as f64)).collect()
            };
            for t in times {
                let (mu, sigma) = market.after.coefficients(theta, t, market.horizon);
                bad_mu |= !mu.is_finite();
                bad_sigma |= !(sigma > zero) || !sigma.is_finite();
            }
        }
        if bad_mu {
            v.push(Violation::new("mu_d", "after-default drift must be finite"));
        }
        if bad_sigma {
            v.push(Violation::new("sigma_d", "after-default volatility must be > 0"));
        }
    }
    match &law {
        DefaultLaw::Exponential { lambda } => {
            if !(*lambda >= zero) || !lambda.is_finite() {
                v.push(Violation::new("lambda", "default intensity must be finite and >= 0"));
            }
        }
        DefaultLaw::Tabulated(_) => {
            if horizon_ok {
                if let Ok(g) = law.survival(market.horizon) {
                    if !(g > zero) {
                        v.push(Violation::new(
                            "alpha",
                            "survival probability must stay positive up to the horizon",
                        ));
                    }
                }
            }
        }
    }
    if let Utility::Power(p) = utility {
        if !(p < S::one()) || p == zero || !p.is_finite() {
            v.push(Violation::new("p", "CRRA exponent must satisfy p<1, p≠0"));
        }
    }
    if v.is_empty() {
        Ok(Validated {
            market,
            law,
            utility,
        })
    } else {
        Err(Error::Validation(v))
    }
}
