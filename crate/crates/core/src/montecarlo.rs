//! Monte Carlo oracle for the expected terminal utility.
//!
//! Coefficients are deterministic between the grid nodes, so log-wealth
//! increments are sampled from their exact Gaussian law: no discretisation
//! bias. The default time is drawn by inverse CDF and is not snapped to the
//! grid.
//!
//! Every path owns a ChaCha stream keyed by its index, and paths are reduced
//! in fixed-size chunks combined in index order, so results do not depend on
//! the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::after_default::{log_weight, sharpe_integral, strategy_after_at};
use crate::before_default::ValuePolicySolution;
use crate::error::{Error, Result, Violation};
use crate::model::{DefaultLaw, MarketSpec, Utility};
use crate::quadrature;

const CHUNK: usize = 2048;
const DECOMPOSITION_STREAM: u64 = 1 << 63;

/// Proportion of wealth in the stock before the default.
pub trait BeforeDefaultStrategy: Sync {
    fn proportion(&self, t: f64) -> f64;

    /// `(int_a^b pi, int_a^b pi^2)`. Composite Simpson by default.
    fn moments(&self, a: f64, b: f64) -> (f64, f64) {
        const PANELS: usize = 8;
        let h = (b - a) / (2 * PANELS) as f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for k in 0..=2 * PANELS {
            let w = if k == 0 || k == 2 * PANELS {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let pi = self.proportion(a + h * k as f64);
            m1 += w * pi;
            m2 += w * pi * pi;
        }
        (m1 * h / 3.0, m2 * h / 3.0)
    }
}

/// Proportion of wealth in the stock after a default at `theta`.
pub trait AfterDefaultStrategy: Sync {
    fn proportion(&self, theta: f64, t: f64) -> f64;
}

/// Same proportion at all times, in both phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantStrategy(pub f64);

impl BeforeDefaultStrategy for ConstantStrategy {
    fn proportion(&self, _t: f64) -> f64 {
        self.0
    }

    fn moments(&self, a: f64, b: f64) -> (f64, f64) {
        ((b - a) * self.0, (b - a) * self.0 * self.0)
    }
}

impl AfterDefaultStrategy for ConstantStrategy {
    fn proportion(&self, _theta: f64, _t: f64) -> f64 {
        self.0
    }
}

/// Wraps a closure `t -> pi`.
pub struct FnStrategy<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> BeforeDefaultStrategy for FnStrategy<F> {
    fn proportion(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> AfterDefaultStrategy for F {
    fn proportion(&self, theta: f64, t: f64) -> f64 {
        self(theta, t)
    }
}

/// Linear interpolation of node values on a uniform grid; moments are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(grid: &[f64], values: Vec<f64>) -> Self {
        assert!(grid.len() >= 2 && grid.len() == values.len());
        let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
        Self {
            start: grid[0],
            step,
            values,
        }
    }

    pub fn from_solution(sol: &ValuePolicySolution<f64>) -> Self {
        Self::new(&sol.grid, sol.pi.clone())
    }

    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + delta).collect(),
            ..self.clone()
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn node(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    fn cell(&self, t: f64) -> usize {
        let last = self.values.len() - 2;
        let x = ((t - self.start) / self.step).floor();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(last)
        }
    }
}

impl BeforeDefaultStrategy for PiecewiseLinear {
    fn proportion(&self, t: f64) -> f64 {
        let i = self.cell(t);
        let w = ((t - self.node(i)) / self.step).clamp(0.0, 1.0);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    fn moments(&self, a: f64, b: f64) -> (f64, f64) {
        let (mut m1, mut m2) = (0.0, 0.0);
        let mut lo = a;
        while lo < b {
            let last = self.values.len() - 2;
            let mut i = self.cell(lo);
            // floor() can land one cell short when lo sits on a node
            while i < last && self.node(i + 1) <= lo {
                i += 1;
            }
            let hi = if i == last { b } else { self.node(i + 1).min(b) };
            let (u, v) = (self.proportion(lo), self.proportion(hi));
            let len = hi - lo;
            m1 += len * (u + v) / 2.0;
            m2 += len * (u * u + u * v + v * v) / 3.0;
            lo = hi;
        }
        (m1, m2)
    }
}

/// Closed-form optimal after-default proportion `mu_d / ((1-p) sigma_d^2)`.
#[derive(Debug, Clone)]
pub struct OptimalAfterDefault {
    market: MarketSpec<f64>,
    utility: Utility<f64>,
}

impl OptimalAfterDefault {
    pub fn new(market: &MarketSpec<f64>, utility: &Utility<f64>) -> Self {
        Self {
            market: market.clone(),
            utility: *utility,
        }
    }
}

impl AfterDefaultStrategy for OptimalAfterDefault {
    fn proportion(&self, theta: f64, t: f64) -> f64 {
        strategy_after_at(&self.market, &self.utility, theta, t).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_time_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            n_time_steps: 200,
            seed: 20_240_601,
            antithetic: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.n_paths == 0 {
            v.push(Violation::new("n_paths", "at least one path is required"));
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            v.push(Violation::new("n_paths", "antithetic sampling needs an even path count"));
        }
        if self.n_time_steps == 0 {
            v.push(Violation::new("n_time_steps", "at least one time step is required"));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimReport {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub decomposition_estimate: f64,
    pub default_fraction: f64,
    pub seed: u64,
    #[serde(skip)]
    pub decomposition_std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

// Welford accumulator with Chan's merge.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        Moments { n, mean, m2 }
    }

    fn estimate(&self) -> Estimate {
        let var = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            std_error: (var / self.n as f64).sqrt(),
            n_samples: self.n as usize,
        }
    }
}

struct Draws {
    rng: ChaCha8Rng,
    flip: bool,
}

impl Draws {
    fn new(seed: &[u8; 32], stream: u64, flip: bool) -> Self {
        let mut rng = ChaCha8Rng::from_seed(*seed);
        rng.set_stream(stream);
        Self { rng, flip }
    }

    // uniform on (0, 1]
    fn uniform(&mut self) -> f64 {
        let u = 1.0 - self.rng.gen::<f64>();
        if self.flip {
            (1.0 - u).max(f64::MIN_POSITIVE)
        } else {
            u
        }
    }

    fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.flip {
            -z
        } else {
            z
        }
    }
}

struct Path<'a, B: ?Sized, A: ?Sized> {
    market: &'a MarketSpec<f64>,
    law: &'a DefaultLaw<f64>,
    utility: &'a Utility<f64>,
    before: &'a B,
    after: &'a A,
    step: f64,
    n_steps: usize,
    // per full step: (int pi, int pi^2), and pi at the right end
    table: Vec<(f64, f64, f64)>,
}

impl<'a, B: BeforeDefaultStrategy + ?Sized, A: AfterDefaultStrategy + ?Sized> Path<'a, B, A> {
    fn new(
        market: &'a MarketSpec<f64>,
        law: &'a DefaultLaw<f64>,
        utility: &'a Utility<f64>,
        before: &'a B,
        after: &'a A,
        n_steps: usize,
    ) -> Self {
        let step = market.horizon / n_steps as f64;
        let table = (0..n_steps)
            .map(|j| {
                let (a, b) = (step * j as f64, Self::node(market, step, n_steps, j + 1));
                let (m1, m2) = before.moments(a, b);
                (m1, m2, before.proportion(b))
            })
            .collect();
        Self {
            market,
            law,
            utility,
            before,
            after,
            step,
            n_steps,
            table,
        }
    }

    fn node(market: &MarketSpec<f64>, step: f64, n_steps: usize, j: usize) -> f64 {
        if j == n_steps {
            market.horizon
        } else {
            step * j as f64
        }
    }

    fn full_step(&self, j: usize, draws: &mut Draws) -> f64 {
        let (m1, m2, _) = self.table[j];
        self.gaussian_increment(m1, m2, draws)
    }

    fn before_increment(&self, a: f64, b: f64, draws: &mut Draws) -> f64 {
        let (m1, m2) = self.before.moments(a, b);
        self.gaussian_increment(m1, m2, draws)
    }

    fn gaussian_increment(&self, m1: f64, m2: f64, draws: &mut Draws) -> f64 {
        let s = self.market.sigma_f;
        self.market.mu_f * m1 - 0.5 * s * s * m2 + s * m2.max(0.0).sqrt() * draws.normal()
    }

    fn after_increment(&self, theta: f64, draws: &mut Draws) -> f64 {
        let horizon = self.market.horizon;
        let integrand = |t: f64| {
            let (mu, sigma) = self.market.after.coefficients(theta, t, horizon);
            let pi = self.after.proportion(theta, t);
            (mu * pi, (pi * sigma).powi(2))
        };
        let growth = quadrature::integrate(|t| integrand(t).0, theta, horizon);
        let var = quadrature::integrate(|t| integrand(t).1, theta, horizon);
        growth - 0.5 * var + var.max(0.0).sqrt() * draws.normal()
    }

    /// Terminal utility of one path and whether it defaulted before `T`.
    fn direct(&self, draws: &mut Draws) -> Result<(f64, bool)> {
        let u = draws.uniform();
        let tau = self.law.sample_default_time(u);
        if tau.is_some_and(|t| t.is_nan() || t < 0.0) {
            return Err(Error::SamplingFailed { u });
        }
        let horizon = self.market.horizon;
        let tau = tau.filter(|t| *t <= horizon);
        let mut growth = 0.0;
        for j in 0..self.n_steps {
            let a = self.step * j as f64;
            let b = Self::node(self.market, self.step, self.n_steps, j + 1);
            match tau {
                Some(t) if t < b => {
                    growth += self.before_increment(a, t, draws);
                    break;
                }
                _ => growth += self.full_step(j, draws),
            }
        }
        if let Some(t) = tau {
            let factor = 1.0 - self.before.proportion(t) * self.market.gamma;
            if !(factor > 0.0) {
                return Err(Error::Inadmissible { t, factor });
            }
            growth += factor.ln();
            growth += self.after_increment(t, draws);
        }
        let wealth = self.market.x0 * growth.exp();
        Ok((self.utility.eval(wealth), tau.is_some()))
    }

    /// `U(X_T^F) G(T) + int_0^T V^d_theta(X_theta^F (1 - pi gamma)) dtheta` on
    /// one no-default path, trapezoidal in `theta`.
    fn decomposition(&self, nodes: &[(f64, f64)], g_horizon: f64, draws: &mut Draws) -> Result<f64> {
        let mut growth = 0.0;
        let mut integrand = Vec::with_capacity(self.n_steps + 1);
        for (j, &(weight, offset)) in nodes.iter().enumerate().take(self.n_steps + 1) {
            let (t, pi) = if j == 0 {
                (0.0, self.before.proportion(0.0))
            } else {
                growth += self.full_step(j - 1, draws);
                (Self::node(self.market, self.step, self.n_steps, j), self.table[j - 1].2)
            };
            let factor = 1.0 - pi * self.market.gamma;
            if !(factor > 0.0) {
                return Err(Error::Inadmissible { t, factor });
            }
            let value = if weight == 0.0 {
                0.0
            } else {
                weight * self.utility.eval(self.market.x0 * growth.exp() * factor) + offset
            };
            integrand.push(value);
        }
        let terminal = self.utility.eval(self.market.x0 * growth.exp()) * g_horizon;
        Ok(terminal + quadrature::trapezoid_uniform(&integrand, self.step))
    }
}

fn seed_bytes(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

// Runs `sample(index, draws)` over all samples, chunked and merged in order.
fn run_paths<F>(cfg: &SimConfig, stream_base: u64, sample: F) -> Result<(Moments, u64)>
where
    F: Fn(&mut Draws, &mut Draws, bool) -> Result<(f64, u64)> + Sync,
{
    let seed = seed_bytes(cfg.seed);
    let samples = if cfg.antithetic {
        cfg.n_paths / 2
    } else {
        cfg.n_paths
    };
    let chunks: Vec<(usize, usize)> = (0..samples)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(samples)))
        .collect();
    let partial: Vec<Result<(Moments, u64)>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = Moments::default();
            let mut events = 0;
            for k in lo..hi {
                let stream = stream_base | k as u64;
                let mut first = Draws::new(&seed, stream, false);
                let mut second = Draws::new(&seed, stream, true);
                let (x, e) = sample(&mut first, &mut second, cfg.antithetic)?;
                acc.push(x);
                events += e;
            }
            Ok((acc, events))
        })
        .collect();
    let mut total = Moments::default();
    let mut events = 0;
    for p in partial {
        let (m, e) = p?;
        total = total.merge(m);
        events += e;
    }
    Ok((total, events))
}

fn decomposition_nodes(
    market: &MarketSpec<f64>,
    law: &DefaultLaw<f64>,
    utility: &Utility<f64>,
    step: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    (0..=n)
        .map(|j| {
            let theta = if j == n { market.horizon } else { step * j as f64 };
            match utility {
                Utility::Power(_) => {
                    let lk = log_weight(market, law, utility, theta)?;
                    Ok((lk.exp(), 0.0))
                }
                Utility::Log => {
                    let alpha = law.density(theta)?;
                    Ok((alpha, alpha * sharpe_integral(market, theta) / 2.0))
                }
            }
        })
        .collect()
}

/// Expected terminal utility through the before/after-default
/// decomposition, simulating only the no-default wealth.
pub fn decomposition_estimate<B: BeforeDefaultStrategy + ?Sized>(
    market: &MarketSpec<f64>,
    law: &DefaultLaw<f64>,
    utility: &Utility<f64>,
    before: &B,
    cfg: &SimConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    let step = market.horizon / cfg.n_time_steps as f64;
    let nodes = decomposition_nodes(market, law, utility, step, cfg.n_time_steps)?;
    let g_horizon = law.survival(market.horizon)?;
    let path = Path::new(market, law, utility, before, &ConstantStrategy(0.0), cfg.n_time_steps);
    let (m, _) = run_paths(cfg, DECOMPOSITION_STREAM, |first, second, anti| {
        let a = path.decomposition(&nodes, g_horizon, first)?;
        if anti {
            let b = path.decomposition(&nodes, g_horizon, second)?;
            Ok((0.5 * (a + b), 0))
        } else {
            Ok((a, 0))
        }
    })?;
    Ok(m.estimate())
}

fn direct_estimate<B, A>(
    market: &MarketSpec<f64>,
    law: &DefaultLaw<f64>,
    utility: &Utility<f64>,
    before: &B,
    after: &A,
    cfg: &SimConfig,
) -> Result<(Estimate, f64)>
where
    B: BeforeDefaultStrategy + ?Sized,
    A: AfterDefaultStrategy + ?Sized,
{
    cfg.validate()?;
    let path = Path::new(market, law, utility, before, after, cfg.n_time_steps);
    let (m, defaults) = run_paths(cfg, 0, |first, second, anti| {
        let (a, da) = path.direct(first)?;
        if anti {
            let (b, db) = path.direct(second)?;
            Ok((0.5 * (a + b), da as u64 + db as u64))
        } else {
            Ok((a, da as u64))
        }
    })?;
    Ok((m.estimate(), defaults as f64 / cfg.n_paths as f64))
}

/// Simulates default time, stock and wealth under the given strategies and
/// estimates `E[U(X_T)]` directly and through the decomposition.
pub fn simulate_wealth<B, A>(
    market: &MarketSpec<f64>,
    law: &DefaultLaw<f64>,
    utility: &Utility<f64>,
    before: &B,
    after: &A,
    cfg: &SimConfig,
) -> Result<SimReport>
where
    B: BeforeDefaultStrategy + ?Sized,
    A: AfterDefaultStrategy + ?Sized,
{
    let (direct, default_fraction) = direct_estimate(market, law, utility, before, after, cfg)?;
    let decomposition = decomposition_estimate(market, law, utility, before, cfg)?;
    Ok(SimReport {
        estimate: direct.mean,
        std_error: direct.std_error,
        n_paths: cfg.n_paths,
        decomposition_estimate: decomposition.mean,
        default_fraction,
        seed: cfg.seed,
        decomposition_std_error: decomposition.std_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRow {
    pub delta: f64,
    /// `None` when the shifted strategy is inadmissible.
    pub estimate: Option<Estimate>,
    pub notice: Option<String>,
}

/// Re-simulates with `pi^F + delta` before the default and the optimal
/// after-default strategy. All rows share the seed.
pub fn perturbation_test(
    market: &MarketSpec<f64>,
    law: &DefaultLaw<f64>,
    utility: &Utility<f64>,
    sol: &ValuePolicySolution<f64>,
    deltas: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<PerturbationRow>> {
    let base = PiecewiseLinear::from_solution(sol);
    let after = OptimalAfterDefault::new(market, utility);
    deltas
        .iter()
        .map(|&delta| {
            let shifted = base.shifted(delta);
            if let Some(worst) = shifted
                .values()
                .iter()
                .map(|pi| pi * market.gamma)
                .find(|x| *x >= 1.0)
            {
                return Ok(PerturbationRow {
                    delta,
                    estimate: None,
                    notice: Some(format!(
                        "skipped: pi * gamma = {worst:.4} >= 1 is inadmissible"
                    )),
                });
            }
            let (est, _) = direct_estimate(market, law, utility, &shifted, &after, cfg)?;
            Ok(PerturbationRow {
                delta,
                estimate: Some(est),
                notice: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::before_default::{solve, SolverConfig};

    fn market(gamma: f64) -> MarketSpec<f64> {
        MarketSpec::new(0.03, 0.1, gamma, 1.0, 1.0)
    }

    fn sim(n_paths: usize, n_time_steps: usize) -> SimConfig {
        SimConfig {
            n_paths,
            n_time_steps,
            seed: 7,
            antithetic: false,
        }
    }

    #[test]
    fn zero_position_is_riskless() {
        let m = market(0.5);
        let law = DefaultLaw::exponential(0.1);
        let u = Utility::Power(0.2);
        let zero = ConstantStrategy(0.0);
        let r = simulate_wealth(&m, &law, &u, &zero, &zero, &sim(5000, 20)).unwrap();
        assert_eq!(r.estimate, u.eval(1.0));
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.decomposition_std_error, 0.0);
    }

    #[test]
    fn zero_position_decomposition_matches_quadrature() {
        // with pi = 0 the decomposition is U(X0) (G(T) + int_0^T k^p)
        let m = market(0.5);
        let law = DefaultLaw::exponential(0.3);
        let u = Utility::Power(0.2);
        let est = decomposition_estimate(&m, &law, &u, &ConstantStrategy(0.0), &sim(8, 4000)).unwrap();
        let mass = quadrature::integrate(|th| log_weight(&m, &law, &u, th).unwrap().exp(), 0.0, 1.0);
        let exact = u.eval(1.0) * ((-0.3f64).exp() + mass);
        assert!(((est.mean - exact) / exact).abs() < 1e-6, "{} vs {exact}", est.mean);
    }

    #[test]
    fn bit_identical_reruns() {
        let m = market(0.1);
        let law = DefaultLaw::exponential(0.05);
        let u = Utility::Power(0.2);
        let after = OptimalAfterDefault::new(&m, &u);
        let cfg = sim(3000, 25);
        let a = simulate_wealth(&m, &law, &u, &ConstantStrategy(2.0), &after, &cfg).unwrap();
        let b = simulate_wealth(&m, &law, &u, &ConstantStrategy(2.0), &after, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_wealth(&m, &law, &u, &ConstantStrategy(2.0), &after, &SimConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.estimate, c.estimate);
    }

    #[test]
    fn default_fraction_is_binomial() {
        let m = market(0.1);
        let lambda = 0.5;
        let law = DefaultLaw::exponential(lambda);
        let u = Utility::Power(0.2);
        let n = 20_000;
        let r = simulate_wealth(&m, &law, &u, &ConstantStrategy(1.0), &ConstantStrategy(1.0), &sim(n, 5)).unwrap();
        let pd = -(-lambda).exp_m1();
        let se = (pd * (1.0 - pd) / n as f64).sqrt();
        assert!((r.default_fraction - pd).abs() < 3.0 * se, "{} vs {pd}", r.default_fraction);
    }

    // closed form of E[U(X_T)] for a constant proportion without default
    fn no_default_value(u: &Utility<f64>, pi: f64) -> f64 {
        let (mu, s) = (0.03, 0.1);
        match *u {
            Utility::Power(p) => (p * (mu * pi - 0.5 * (1.0 - p) * s * s * pi * pi)).exp() / p,
            Utility::Log => mu * pi - 0.5 * s * s * pi * pi,
        }
    }

    #[test]
    fn exact_increments_without_default() {
        let m = market(0.0);
        let law = DefaultLaw::exponential(0.0);
        for u in [Utility::Power(0.2), Utility::Power(-0.5), Utility::Log] {
            for pi in [0.5, 3.0] {
                let r = simulate_wealth(&m, &law, &u, &ConstantStrategy(pi), &ConstantStrategy(pi), &sim(40_000, 4))
                    .unwrap();
                let exact = no_default_value(&u, pi);
                assert!((r.estimate - exact).abs() < 3.0 * r.std_error, "{u:?} {pi}: {} vs {exact}", r.estimate);
                assert_eq!(r.default_fraction, 0.0);
            }
        }
    }

    #[test]
    fn antithetic_pairs_reduce_error() {
        let m = market(0.0);
        let law = DefaultLaw::exponential(0.0);
        let u = Utility::Log;
        let plain = simulate_wealth(&m, &law, &u, &ConstantStrategy(3.0), &ConstantStrategy(3.0), &sim(20_000, 4))
            .unwrap();
        let anti_cfg = SimConfig {
            antithetic: true,
            ..sim(20_000, 4)
        };
        let anti = simulate_wealth(&m, &law, &u, &ConstantStrategy(3.0), &ConstantStrategy(3.0), &anti_cfg).unwrap();
        // log wealth is linear in the normals, so the pairs cancel exactly
        let exact = no_default_value(&u, 3.0);
        assert!((anti.estimate - exact).abs() < 1e-12);
        assert!(anti.std_error < 1e-12 && plain.std_error > 1e-3);
        assert!(SimConfig { n_paths: 3, ..anti_cfg }.validate().is_err());
    }

    #[test]
    fn immediate_default_applies_the_loss() {
        let m = market(0.1);
        let law = DefaultLaw::exponential(1e6);
        let u = Utility::Power(0.2);
        let r = simulate_wealth(&m, &law, &u, &ConstantStrategy(1.0), &ConstantStrategy(0.0), &sim(2000, 10)).unwrap();
        let exact = u.eval(0.9);
        assert!(((r.estimate - exact) / exact).abs() < 1e-3);
        assert_eq!(r.default_fraction, 1.0);
    }

    #[test]
    fn decomposition_agrees_with_direct_without_loss() {
        let m = market(0.0);
        let law = DefaultLaw::exponential(0.3);
        let u = Utility::Power(0.2);
        let after = OptimalAfterDefault::new(&m, &u);
        let r = simulate_wealth(&m, &law, &u, &ConstantStrategy(2.0), &after, &sim(40_000, 50)).unwrap();
        let se = r.std_error.hypot(r.decomposition_std_error);
        assert!((r.estimate - r.decomposition_estimate).abs() < 3.0 * se);
    }

    #[test]
    fn piecewise_linear_moments_are_exact() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let values: Vec<f64> = grid.iter().map(|t| (3.0 * t).sin()).collect();
        let pl = PiecewiseLinear::new(&grid, values);
        let (m1, m2) = pl.moments(0.13, 0.87);
        let e1 = quadrature::integrate(|t| pl.proportion(t), 0.13, 0.2)
            + (2..8).map(|k| quadrature::integrate(|t| pl.proportion(t), k as f64 / 10.0, (k + 1) as f64 / 10.0)).sum::<f64>()
            + quadrature::integrate(|t| pl.proportion(t), 0.8, 0.87);
        assert!((m1 - e1).abs() < 1e-13);
        let fine = FnStrategy(|t| pl.proportion(t));
        let (_, f2) = (0..74).fold((0.0, 0.0), |acc, k| {
            let a = 0.13 + 0.01 * k as f64;
            let (x, y) = fine.moments(a, a + 0.01);
            (acc.0 + x, acc.1 + y)
        });
        assert!((m2 - f2).abs() < 1e-6);
        assert!((pl.moments(0.3, 0.3).0).abs() < 1e-15);
    }

    #[test]
    fn inadmissible_shifts_are_skipped() {
        let m = market(0.8);
        let law = DefaultLaw::exponential(0.01);
        let u = Utility::Power(0.2);
        let sol = solve(&m, &law, &u, &SolverConfig::default().with_steps(100)).unwrap();
        let rows = perturbation_test(&m, &law, &u, &sol, &[-0.3, 0.5], &sim(2000, 20)).unwrap();
        assert!(rows[0].estimate.is_some() && rows[0].notice.is_none());
        assert!(rows[1].estimate.is_none());
        assert!(rows[1].notice.as_deref().unwrap().contains("inadmissible"));
    }
}
