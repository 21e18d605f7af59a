//! Optimal investment for a CRRA investor holding a stock exposed to the
//! default of a counterparty.
//!
//! The problem splits at the default time into an after-default
//! complete-market problem with closed-form value [`after_default`], and a
//! before-default problem whose value multiplier solves a backward ODE
//! ([`before_default`]). [`montecarlo`] simulates the wealth process as an
//! independent check and [`report`] drives the command-line tool.
//!
//! The deterministic solvers are generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below fix `f64`.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod after_default;
pub mod before_default;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod report;
pub mod scalar;

pub use error::{Error, Result, Violation};
pub use scalar::Scalar;

pub type MarketSpec = model::MarketSpec<f64>;
pub type DefaultLaw = model::DefaultLaw<f64>;
pub type Utility = model::Utility<f64>;
pub type AfterDefaultSchedule = model::AfterDefaultSchedule<f64>;
pub type TabulatedDensity = model::TabulatedDensity<f64>;
pub type AfterDefaultPoint = after_default::AfterDefaultPoint<f64>;
pub type SolverConfig = before_default::SolverConfig<f64>;
pub type ValuePolicySolution = before_default::ValuePolicySolution<f64>;
pub type MertonBenchmark = before_default::MertonBenchmark<f64>;
pub type Driver = before_default::Driver<f64>;

pub type MarketSpec32 = model::MarketSpec<f32>;
pub type DefaultLaw32 = model::DefaultLaw<f32>;
pub type SolverConfig32 = before_default::SolverConfig<f32>;
pub type ValuePolicySolution32 = before_default::ValuePolicySolution<f32>;
