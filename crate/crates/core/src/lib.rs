//! Solver for turn-based two-player stochastic games with non-negative total
//! accumulated reward and reachability objectives.
//!
//! Modules are generic over the scalar type (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod bellman;
pub mod eval;
pub mod gallery;
pub mod linalg;
pub mod model;
pub mod numerics;
pub mod random;
pub mod scalar;
pub mod sim;
pub mod strategy;

pub use bellman::{SolveError, SolveOptions, StopReason};
pub use eval::{EvalError, EvalMethod};
pub use model::{ModelError, Owner, TargetSet};
pub use numerics::NumericsError;
pub use scalar::Scalar;
pub use sim::SimOptions;
pub use strategy::{AnyStrategy, MdStrategy, Memoryless, StrategyError};

pub type ExtValue = numerics::ExtValue<f64>;
pub type Game = model::Game<f64>;
pub type GameBuilder = model::GameBuilder<f64>;
pub type ValueVector = bellman::ValueVector<f64>;
pub type SolveReport = bellman::SolveReport<f64>;
pub type DiscountedReport = bellman::DiscountedReport<f64>;
pub type MrStrategy = strategy::MrStrategy<f64>;
pub type HdStrategy = strategy::HdStrategy<f64>;
pub type EvalResult = eval::EvalResult<f64>;
pub type SimStats = sim::SimStats;
