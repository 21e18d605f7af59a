//! Before-default problem with deterministic coefficients.
//!
//! The value is `U(x) Y(t)` where `Y` solves the backward ODE
//!
//! ```text
//! Y(t) = G(T) + int_t^T f(s, Y(s)) ds,
//! f(t, y) = p sup_{pi < 1/gamma} [ (mu pi - (1-p)/2 pi^2 sigma^2) y + k(t)^p (1 - pi gamma)^p / p ]
//! ```
//!
//! solved by Howard policy iteration: RK4 evaluation of the linear ODE for a
//! frozen policy, then a pointwise maximisation of the concave driver at
//! every node.

use crate::after_default::log_weight;
use crate::error::{Error, Result, Violation};
use crate::model::{DefaultLaw, MarketSpec, Utility};
use crate::scalar::Scalar;

/// Default-free optimum under the constraint `pi <= 1/gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertonBenchmark<S> {
    pub pi: S,
    /// Certainty-equivalent growth rate `mu pi - (1-p) sigma^2 pi^2 / 2`.
    pub rate: S,
    /// `exp(p rate (T - t))`; identically one for log utility.
    pub y: S,
}

pub fn merton_constrained<S: Scalar>(market: &MarketSpec<S>, utility: &Utility<S>, t: S) -> MertonBenchmark<S> {
    let driver = Driver::new(market, utility);
    let pi = driver.merton_pi();
    let p = driver.p;
    let rate = driver.mu * pi - (S::one() - p) * driver.sigma * driver.sigma * pi * pi / S::lit(2.0);
    let y = if utility.is_log() {
        S::one()
    } else {
        (p * rate * (market.horizon - t)).exp()
    };
    MertonBenchmark { pi, rate, y }
}

/// The concave function maximised pointwise by the driver,
/// `F(pi) = (mu pi - (1-p)/2 pi^2 sigma^2) y + k^p (1 - pi gamma)^p / p`
/// (with `k^p ln(1 - pi gamma)` in place of the jump term for `p = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Driver<S> {
    pub mu: S,
    pub sigma: S,
    pub gamma: S,
    pub p: S,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverMaximum<S> {
    pub pi: S,
    /// `p F(pi)` for power utility, `F(pi)` for log utility.
    pub f_value: S,
}

impl<S: Scalar> Driver<S> {
    pub fn new(market: &MarketSpec<S>, utility: &Utility<S>) -> Self {
        Self {
            mu: market.mu_f,
            sigma: market.sigma_f,
            gamma: market.gamma,
            p: utility.exponent(),
        }
    }

    pub fn cap(&self) -> S {
        if self.gamma > S::zero() {
            S::one() / self.gamma
        } else {
            S::infinity()
        }
    }

    pub fn unconstrained_merton(&self) -> S {
        self.mu / ((S::one() - self.p) * self.sigma * self.sigma)
    }

    pub fn merton_pi(&self) -> S {
        self.unconstrained_merton().min(self.cap())
    }

    fn growth(&self, pi: S) -> S {
        self.mu * pi - (S::one() - self.p) / S::lit(2.0) * pi * pi * self.sigma * self.sigma
    }

    pub fn objective(&self, pi: S, y: S, kp: S) -> S {
        let base = self.growth(pi) * y;
        if kp == S::zero() || self.gamma == S::zero() {
            return base + if self.p == S::zero() { S::zero() } else { kp / self.p };
        }
        let slack = S::one() - pi * self.gamma;
        if slack < S::zero() || (slack == S::zero() && self.p <= S::zero()) {
            return S::neg_infinity();
        }
        let jump = if self.p == S::zero() {
            kp * slack.ln()
        } else {
            kp * slack.powf(self.p) / self.p
        };
        base + jump
    }

    pub fn derivative(&self, pi: S, y: S, kp: S) -> S {
        let smooth = self.mu * y - (S::one() - self.p) * y * self.sigma * self.sigma * pi;
        if kp == S::zero() || self.gamma == S::zero() {
            return smooth;
        }
        let slack = S::one() - pi * self.gamma;
        smooth - self.gamma * kp * slack.powf(self.p - S::one())
    }

    /// Bracket `[pi^M - rho, pi^M]` with
    /// `rho = (gamma^p k^p / ((1-p) y sigma^2))^(1/(2-p))`.
    pub fn bounds(&self, y: S, kp: S) -> (S, S) {
        let upper = self.merton_pi();
        if self.gamma == S::zero() || kp == S::zero() {
            return (upper, upper);
        }
        let one = S::one();
        let rho = (self.gamma.powf(self.p) * kp / ((one - self.p) * y * self.sigma * self.sigma))
            .powf(one / (S::lit(2.0) - self.p));
        (upper - rho, upper)
    }

    /// Unique maximiser of `F` on `pi < 1/gamma`, by bisection on the
    /// strictly decreasing `F'` over the bound bracket.
    pub fn maximize(&self, y: S, kp: S, root_tol: S) -> Result<DriverMaximum<S>> {
        if !(y > S::zero()) || !y.is_finite() {
            return Err(Error::NonPositiveMultiplier { y: y.as_f64() });
        }
        if !kp.is_finite() || kp < S::zero() {
            return Err(Error::NonFiniteWeight { value: kp.as_f64() });
        }
        let pi = if self.gamma == S::zero() || kp == S::zero() {
            self.merton_pi()
        } else {
            self.bisect(y, kp, root_tol)
        };
        let value = self.objective(pi, y, kp);
        let f_value = if self.p == S::zero() { value } else { self.p * value };
        Ok(DriverMaximum { pi, f_value })
    }

    fn bisect(&self, y: S, kp: S, root_tol: S) -> S {
        let cap = self.cap();
        let (lower, upper) = self.bounds(y, kp);
        let mut hi = upper.min(cap - cap * S::lit(1e-14));
        let resolution = S::lit(1e-9).max(S::epsilon() * S::lit(16.0));
        let mut lo = (lower - resolution * (S::one() + lower.abs())).min(hi);
        let d = |pi: S| self.derivative(pi, y, kp);
        // the bracket is guaranteed analytically; widen only on rounding trouble
        let mut width = (hi - lo).max(S::one());
        for _ in 0..64 {
            if d(lo) >= S::zero() {
                break;
            }
            lo = lo - width;
            width = width + width;
        }
        if d(hi) >= S::zero() {
            return hi;
        }
        for _ in 0..200 {
            let mid = lo + (hi - lo) / S::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if d(mid) > S::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= root_tol {
                break;
            }
        }
        lo + (hi - lo) / S::lit(2.0)
    }
}

/// `k(t)^p` from its logarithm.
fn weight<S: Scalar>(market: &MarketSpec<S>, law: &DefaultLaw<S>, utility: &Utility<S>, t: S) -> Result<S> {
    let lk = log_weight(market, law, utility, t)?;
    let kp = lk.exp();
    if !kp.is_finite() {
        return Err(Error::NonFiniteWeight { value: kp.as_f64() });
    }
    Ok(kp)
}

pub fn maximize_driver<S: Scalar>(
    market: &MarketSpec<S>,
    law: &DefaultLaw<S>,
    utility: &Utility<S>,
    t: S,
    y: S,
    root_tol: S,
) -> Result<DriverMaximum<S>> {
    let kp = weight(market, law, utility, t)?;
    Driver::new(market, utility).maximize(y, kp, root_tol)
}

pub fn strategy_bounds<S: Scalar>(
    market: &MarketSpec<S>,
    law: &DefaultLaw<S>,
    utility: &Utility<S>,
    t: S,
    y: S,
) -> Result<(S, S)> {
    let kp = weight(market, law, utility, t)?;
    Ok(Driver::new(market, utility).bounds(y, kp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<S> {
    pub n_steps: usize,
    /// Stop when the sup-norm policy change falls below this.
    pub howard_tol: S,
    pub max_howard_iters: usize,
    /// Bisection interval width at which the driver maximisation stops.
    pub root_tol: S,
    /// Optional extra stop on `|Y(0)` change`|`.
    pub value_tol: Option<S>,
}

impl<S: Scalar> Default for SolverConfig<S> {
    fn default() -> Self {
        Self {
            n_steps: 1000,
            howard_tol: S::lit(1e-10),
            max_howard_iters: 50,
            root_tol: S::lit(1e-14),
            value_tol: None,
        }
    }
}

impl<S: Scalar> SolverConfig<S> {
    pub fn with_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.n_steps < 2 {
            v.push(Violation::new("n_steps", "grid needs at least 2 steps"));
        }
        if !(self.howard_tol > S::zero()) {
            v.push(Violation::new("howard_tol", "tolerance must be > 0"));
        }
        if !(self.root_tol > S::zero()) {
            v.push(Violation::new("root_tol", "tolerance must be > 0"));
        }
        if self.max_howard_iters == 0 {
            v.push(Violation::new("max_howard_iters", "at least one iteration is required"));
        }
        if let Some(tol) = self.value_tol {
            if !(tol > S::zero()) {
                v.push(Violation::new("value_tol", "tolerance must be > 0"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// Value multiplier, optimal policy, bracket and benchmark on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePolicySolution<S> {
    pub grid: Vec<S>,
    pub y: Vec<S>,
    pub pi: Vec<S>,
    pub pi_lower: Vec<S>,
    pub pi_upper: Vec<S>,
    pub y_merton: Vec<S>,
    pub pi_merton: Vec<S>,
    pub log_kp: Vec<S>,
    /// Policy improvement sweeps performed; zero for the log closed form.
    pub iterations: usize,
    /// Sup-norm policy change of the last sweep.
    pub residual: S,
    /// `Y(0)` after each policy evaluation, in order.
    pub value_history: Vec<S>,
}

impl<S: Scalar> ValuePolicySolution<S> {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn horizon(&self) -> S {
        *self.grid.last().unwrap()
    }
}

/// Time average of a grid function by the trapezoidal rule.
pub fn time_average<S: Scalar>(grid: &[S], values: &[S]) -> S {
    assert!(grid.len() >= 2 && grid.len() == values.len());
    let mut acc = S::zero();
    for i in 1..grid.len() {
        acc = acc + (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]) / S::lit(2.0);
    }
    acc / (grid[grid.len() - 1] - grid[0])
}

pub fn time_average_strategy<S: Scalar>(sol: &ValuePolicySolution<S>) -> S {
    time_average(&sol.grid, &sol.pi)
}

fn uniform_grid<S: Scalar>(horizon: S, n: usize) -> Vec<S> {
    let h = horizon / S::lit(n as f64);
    (0..=n)
        .map(|i| if i == n { horizon } else { h * S::lit(i as f64) })
        .collect()
}

struct PolicyEvaluator<S> {
    driver: Driver<S>,
    grid: Vec<S>,
    step: S,
    kp_nodes: Vec<S>,
    kp_mids: Vec<S>,
    terminal: S,
}

impl<S: Scalar> PolicyEvaluator<S> {
    fn rhs(&self, y: S, pi: S, kp: S) -> S {
        let d = &self.driver;
        let jump = if kp == S::zero() || d.gamma == S::zero() {
            kp
        } else {
            kp * (S::one() - pi * d.gamma).powf(d.p)
        };
        -(d.p * d.growth(pi) * y + jump)
    }

    /// Backward RK4 for the linear ODE under a piecewise-linear policy.
    fn evaluate(&self, policy: &[S]) -> Result<Vec<S>> {
        let n = self.grid.len() - 1;
        let h = self.step;
        let two = S::lit(2.0);
        let mut y = vec![S::zero(); n + 1];
        y[n] = self.terminal;
        for i in (0..n).rev() {
            let y1 = y[i + 1];
            let (p0, p1) = (policy[i], policy[i + 1]);
            let pm = (p0 + p1) / two;
            let k1 = self.rhs(y1, p1, self.kp_nodes[i + 1]);
            let k2 = self.rhs(y1 - h / two * k1, pm, self.kp_mids[i]);
            let k3 = self.rhs(y1 - h / two * k2, pm, self.kp_mids[i]);
            let k4 = self.rhs(y1 - h * k3, p0, self.kp_nodes[i]);
            let y0 = y1 - h / S::lit(6.0) * (k1 + two * k2 + two * k3 + k4);
            if !(y0 > S::zero()) || !y0.is_finite() {
                return Err(Error::NonPositiveValue {
                    t: self.grid[i].as_f64(),
                    y: y0.as_f64(),
                });
            }
            y[i] = y0;
        }
        Ok(y)
    }
}

/// Howard policy iteration for power utility.
pub fn solve_howard<S: Scalar>(
    market: &MarketSpec<S>,
    law: &DefaultLaw<S>,
    utility: &Utility<S>,
    cfg: &SolverConfig<S>,
) -> Result<ValuePolicySolution<S>> {
    if utility.is_log() {
        return Err(Error::UtilityKind { expected: "power" });
    }
    cfg.validate()?;
    let n = cfg.n_steps;
    let grid = uniform_grid(market.horizon, n);
    let step = market.horizon / S::lit(n as f64);
    let half = step / S::lit(2.0);
    let log_kp = grid
        .iter()
        .map(|&t| log_weight(market, law, utility, t))
        .collect::<Result<Vec<_>>>()?;
    let finite = |lk: S| -> Result<S> {
        let kp = lk.exp();
        if kp.is_finite() {
            Ok(kp)
        } else {
            Err(Error::NonFiniteWeight { value: kp.as_f64() })
        }
    };
    let kp_nodes = log_kp.iter().map(|&lk| finite(lk)).collect::<Result<Vec<_>>>()?;
    let kp_mids = grid[..n]
        .iter()
        .map(|&t| finite(log_weight(market, law, utility, t + half)?))
        .collect::<Result<Vec<_>>>()?;

    let driver = Driver::new(market, utility);
    let evaluator = PolicyEvaluator {
        driver,
        grid: grid.clone(),
        step,
        kp_nodes,
        kp_mids,
        terminal: law.survival(market.horizon)?,
    };

    // Constrained Merton start. With p < 0 a binding cap makes the jump term
    // infinite, so start halfway to the cap instead.
    let mut start = driver.merton_pi();
    if driver.p < S::zero() && driver.gamma > S::zero() && driver.unconstrained_merton() >= driver.cap() {
        start = driver.cap() / S::lit(2.0);
    }
    let mut policy = vec![start; n + 1];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut residual = S::infinity();
    let mut converged = false;
    while iterations < cfg.max_howard_iters {
        let y = evaluator.evaluate(&policy)?;
        let y0 = y[0];
        if let (Some(tol), Some(prev)) = (cfg.value_tol, history.last()) {
            if (y0 - *prev).abs() < tol {
                history.push(y0);
                converged = true;
                break;
            }
        }
        history.push(y0);
        let improved = y
            .iter()
            .zip(&evaluator.kp_nodes)
            .map(|(&yi, &kp)| driver.maximize(yi, kp, cfg.root_tol).map(|m| m.pi))
            .collect::<Result<Vec<_>>>()?;
        residual = improved
            .iter()
            .zip(&policy)
            .fold(S::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
        policy = improved;
        iterations += 1;
        if residual < cfg.howard_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            residual: residual.as_f64(),
        });
    }
    let y = evaluator.evaluate(&policy)?;
    history.push(y[0]);

    let mut pi_lower = Vec::with_capacity(n + 1);
    let mut pi_upper = Vec::with_capacity(n + 1);
    let mut y_merton = Vec::with_capacity(n + 1);
    let mut pi_merton = Vec::with_capacity(n + 1);
    for (i, &t) in grid.iter().enumerate() {
        let (lo, hi) = driver.bounds(y[i], evaluator.kp_nodes[i]);
        pi_lower.push(lo);
        pi_upper.push(hi);
        let m = merton_constrained(market, utility, t);
        y_merton.push(m.y);
        pi_merton.push(m.pi);
    }
    Ok(ValuePolicySolution {
        grid,
        y,
        pi: policy,
        pi_lower,
        pi_upper,
        y_merton,
        pi_merton,
        log_kp,
        iterations,
        residual,
        value_history: history,
    })
}

/// Optimal log-utility policy at one time: root below `1/gamma` of
/// `(mu - sigma^2 pi)(1 - pi gamma) G = gamma alpha`.
pub fn log_policy<S: Scalar>(market: &MarketSpec<S>, g: S, alpha: S, t: S) -> Result<S> {
    let driver = Driver::new(market, &Utility::Log);
    let (mu, s2, gamma) = (driver.mu, driver.sigma * driver.sigma, driver.gamma);
    let cap = driver.cap();
    if gamma == S::zero() {
        return Ok(mu / s2);
    }
    if alpha == S::zero() {
        return Ok((mu / s2).min(cap));
    }
    let a = s2 * gamma * g;
    let b = -(s2 + mu * gamma) * g;
    let c = mu * g - gamma * alpha;
    let disc = b * b - S::lit(4.0) * a * c;
    if disc < S::zero() || a == S::zero() {
        return Err(Error::NoAdmissibleRoot { t: t.as_f64() });
    }
    let q = -(b + b.signum() * disc.sqrt()) / S::lit(2.0);
    let mut roots = vec![q / a];
    if q != S::zero() {
        roots.push(c / q);
    }
    roots
        .into_iter()
        .filter(|r| r.is_finite() && *r < cap)
        .map(|r| (r, driver.objective(r, g, alpha)))
        .fold(None, |best: Option<(S, S)>, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .map(|(r, _)| r)
        .ok_or(Error::NoAdmissibleRoot { t: t.as_f64() })
}

/// Log utility: `Y(t) = G(t)` and the policy solves the limiting
/// first-order condition node by node.
pub fn solve_log<S: Scalar>(
    market: &MarketSpec<S>,
    law: &DefaultLaw<S>,
    cfg: &SolverConfig<S>,
) -> Result<ValuePolicySolution<S>> {
    cfg.validate()?;
    let n = cfg.n_steps;
    let utility = Utility::Log;
    let grid = uniform_grid(market.horizon, n);
    let driver = Driver::new(market, &utility);
    let merton = merton_constrained(market, &utility, S::zero());
    let mut sol = ValuePolicySolution {
        grid: grid.clone(),
        y: Vec::with_capacity(n + 1),
        pi: Vec::with_capacity(n + 1),
        pi_lower: Vec::with_capacity(n + 1),
        pi_upper: Vec::with_capacity(n + 1),
        y_merton: vec![S::one(); n + 1],
        pi_merton: vec![merton.pi; n + 1],
        log_kp: Vec::with_capacity(n + 1),
        iterations: 0,
        residual: S::zero(),
        value_history: Vec::new(),
    };
    for &t in &grid {
        let g = law.survival(t)?;
        if !(g > S::zero()) {
            return Err(Error::SurvivalExhausted { t: t.as_f64() });
        }
        let alpha = law.density(t)?;
        let pi = log_policy(market, g, alpha, t)?;
        let (lo, hi) = driver.bounds(g, alpha);
        sol.y.push(g);
        sol.pi.push(pi);
        sol.pi_lower.push(lo);
        sol.pi_upper.push(hi);
        sol.log_kp.push(log_weight(market, law, &utility, t)?);
    }
    sol.value_history.push(sol.y[0]);
    Ok(sol)
}

/// Dispatches on the utility kind.
pub fn solve<S: Scalar>(
    market: &MarketSpec<S>,
    law: &DefaultLaw<S>,
    utility: &Utility<S>,
    cfg: &SolverConfig<S>,
) -> Result<ValuePolicySolution<S>> {
    match utility {
        Utility::Log => solve_log(market, law, cfg),
        Utility::Power(_) => solve_howard(market, law, utility, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market(gamma: f64) -> MarketSpec<f64> {
        MarketSpec::new(0.03, 0.1, gamma, 1.0, 1.0)
    }

    fn cfg() -> SolverConfig<f64> {
        SolverConfig::default()
    }

    // brute-force argmax of F on a uniform grid
    fn scan(driver: &Driver<f64>, y: f64, kp: f64, lo: f64, hi: f64, n: usize) -> f64 {
        let mut best = (f64::NEG_INFINITY, lo);
        for i in 0..=n {
            let pi = lo + (hi - lo) * i as f64 / n as f64;
            let v = driver.objective(pi, y, kp);
            if v > best.0 {
                best = (v, pi);
            }
        }
        best.1
    }

    #[test]
    fn merton_column_values() {
        let m = merton_constrained(&market(0.5), &Utility::Power(0.2), 0.0);
        assert!((m.pi - 2.0).abs() < 1e-12);
        let m = merton_constrained(&market(0.01), &Utility::Power(-0.2), 0.0);
        assert!((m.pi - 2.5).abs() < 1e-12);
        let m = merton_constrained(&market(0.8), &Utility::Log, 0.0);
        assert!((m.pi - 1.25).abs() < 1e-12);
        assert_eq!(m.y, 1.0);
        let m = merton_constrained(&market(0.1), &Utility::Power(0.2), 0.25);
        let c = 0.03 * 3.75 - 0.8 * 0.01 * 3.75 * 3.75 / 2.0;
        assert!((m.rate - c).abs() < 1e-15);
        assert!((m.y - (0.2 * c * 0.75).exp()).abs() < 1e-15);
    }

    #[test]
    fn unconstrained_driver_closed_form() {
        let d = Driver::new(&market(0.0), &Utility::Power(0.2));
        for kp in [0.0, 0.01, 2.5] {
            let m = d.maximize(1.0, kp, 1e-14).unwrap();
            assert!((m.pi - 3.75).abs() < 1e-12);
            let f = 0.05625 + kp / 0.2;
            assert!((m.f_value - 0.2 * f).abs() < 1e-12, "{} vs {}", m.f_value, 0.2 * f);
        }
    }

    #[test]
    fn driver_matches_grid_scan() {
        let m = market(0.1);
        let law = DefaultLaw::exponential(0.01);
        let u = Utility::Power(0.2);
        let got = maximize_driver(&m, &law, &u, 0.5, 1.0, 1e-14).unwrap();
        let (lo, hi) = strategy_bounds(&m, &law, &u, 0.5, 1.0).unwrap();
        let d = Driver::new(&m, &u);
        let kp = log_weight(&m, &law, &u, 0.5).unwrap().exp();
        let oracle = scan(&d, 1.0, kp, lo - 1.0, hi, 2_000_000);
        assert!((got.pi - oracle).abs() < 5e-6, "{} vs {oracle}", got.pi);
        assert!(lo <= got.pi && got.pi <= hi);
    }

    #[test]
    fn vanishing_weight_recovers_merton() {
        for (g, p, want) in [(0.1, 0.2, 3.75), (0.5, 0.2, 2.0), (0.5, -0.2, 2.0)] {
            let d = Driver::new(&market(g), &Utility::Power(p));
            let m = d.maximize(1.0, 1e-300, 1e-14).unwrap();
            assert!((m.pi - want).abs() < 1e-9, "{g} {p}: {}", m.pi);
        }
    }

    #[test]
    fn driver_rejects_bad_inputs() {
        let d = Driver::new(&market(0.1), &Utility::Power(0.2));
        assert!(matches!(d.maximize(0.0, 0.1, 1e-14), Err(Error::NonPositiveMultiplier { .. })));
        assert!(matches!(d.maximize(1.0, f64::INFINITY, 1e-14), Err(Error::NonFiniteWeight { .. })));
    }

    #[test]
    fn bounds_hand_value() {
        let d = Driver::new(&market(0.5), &Utility::Power(0.2));
        let (lo, hi) = d.bounds(1.0, 0.01);
        assert!((hi - 2.0).abs() < 1e-15);
        let want = 2.0 - (0.5f64.powf(0.2) * 0.01 / (0.8 * 0.01)).powf(1.0 / 1.8);
        assert!((lo - want).abs() < 1e-15);
        assert_eq!(d.bounds(1.0, 0.0), (2.0, 2.0));
    }

    #[test]
    fn small_gamma_closes_the_gap() {
        let d = Driver::new(&market(1e-8), &Utility::Power(0.2));
        let m = d.maximize(1.0, 0.01, 1e-14).unwrap();
        assert!((m.pi - 3.75).abs() < 1e-6);
    }

    #[test]
    fn foc_holds_at_maximiser() {
        for (g, p, kp, y) in [(0.1, 0.2, 0.01, 1.0), (0.5, -0.2, 0.3, 0.9), (0.8, 0.5, 0.05, 1.2)] {
            let d = Driver::new(&market(g), &Utility::Power(p));
            let m = d.maximize(y, kp, 1e-14).unwrap();
            let (lo, _) = d.bounds(y, kp);
            let tol = 1e-9 * (1.0 + d.derivative(lo, y, kp).abs());
            assert!(d.derivative(m.pi, y, kp).abs() <= tol);
        }
    }

    #[test]
    fn table_one_cell() {
        let sol = solve_howard(&market(0.1), &DefaultLaw::exponential(0.01), &Utility::Power(0.2), &cfg()).unwrap();
        let avg = time_average_strategy(&sol);
        assert!((avg - 3.57).abs() < 0.02, "{avg}");
        assert_eq!(sol.y[sol.len() - 1], (-0.01f64).exp());
    }

    #[test]
    fn table_two_negative_cell() {
        let sol = solve_howard(&market(0.5), &DefaultLaw::exponential(0.1), &Utility::Power(-0.2), &cfg()).unwrap();
        let avg = time_average_strategy(&sol);
        assert!((avg + 0.58).abs() < 0.02, "{avg}");
    }

    #[test]
    fn no_default_reduces_to_merton() {
        for (p, g) in [(0.2, 0.1), (-0.2, 0.5), (0.5, 0.8)] {
            let sol = solve_howard(&market(g), &DefaultLaw::exponential(0.0), &Utility::Power(p), &cfg()).unwrap();
            for i in 0..sol.len() {
                assert!((sol.y[i] - sol.y_merton[i]).abs() < 1e-10);
                assert!((sol.pi[i] - sol.pi_merton[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn log_closed_form_cells() {
        let sol = solve_log(&market(0.5), &DefaultLaw::exponential(0.3), &cfg()).unwrap();
        assert!(sol.pi.iter().all(|pi| (pi + 3.0).abs() < 1e-12));
        let sol = solve_log(&market(0.1), &DefaultLaw::exponential(0.3), &cfg()).unwrap();
        assert!(sol.pi.iter().all(|pi| pi.abs() < 1e-12));
        let sol = solve_log(&market(0.1), &DefaultLaw::exponential(0.01), &cfg()).unwrap();
        assert!((time_average_strategy(&sol) - 2.86).abs() < 0.02);
        assert!((sol.y[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_policy_without_gamma() {
        let pi = log_policy(&market(0.0), 0.9, 0.1, 0.0).unwrap();
        assert!((pi - 3.0).abs() < 1e-15);
    }

    #[test]
    fn averages() {
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        assert!((time_average(&grid, &grid) - 0.5).abs() < 1e-12);
        let c = vec![1.7; grid.len()];
        assert!((time_average(&grid, &c) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn solver_config_checked() {
        let bad = SolverConfig::<f64> { n_steps: 1, howard_tol: 0.0, ..Default::default() };
        let Err(Error::Validation(v)) = bad.validate() else { panic!() };
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn utility_kind_enforced() {
        let r = solve_howard(&market(0.1), &DefaultLaw::exponential(0.01), &Utility::Log, &cfg());
        assert!(matches!(r, Err(Error::UtilityKind { .. })));
    }

    #[test]
    fn iteration_cap_reported() {
        let c = SolverConfig { max_howard_iters: 1, ..cfg() };
        let r = solve_howard(&market(0.5), &DefaultLaw::exponential(0.1), &Utility::Power(0.2), &c);
        assert!(matches!(r, Err(Error::NotConverged { iterations: 1, .. })));
    }

    #[test]
    fn single_precision_solver() {
        let m = MarketSpec::new(0.03f32, 0.1, 0.1, 1.0, 1.0);
        let c = SolverConfig::<f32> { n_steps: 200, howard_tol: 1e-5, root_tol: 1e-6, ..Default::default() };
        let sol = solve_howard(&m, &DefaultLaw::exponential(0.01f32), &Utility::Power(0.2), &c).unwrap();
        assert!((time_average_strategy(&sol) - 3.57).abs() < 0.02);
    }
}
