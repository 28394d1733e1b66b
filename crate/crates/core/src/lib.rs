//! Model selection for batch policy optimization in linear contextual
//! bandits: pessimistic ridge learners, complexity-coverage selection,
//! SLOPE and hold-out selection, plus the simulation harness around them.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod environment;
pub mod error;
pub mod experiment;
pub mod learner;
pub mod lower_bound;
pub mod model_classes;
pub mod numerics;
pub mod rng;
pub mod scalar;
pub mod selection;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = numerics::Matrix<f64>;
pub type Cholesky = numerics::Cholesky<f64>;
pub type CovarianceMatrix = numerics::CovarianceMatrix<f64>;
pub type RidgeFit = numerics::RidgeFit<f64>;
pub type RidgeAccumulator = numerics::RidgeAccumulator<f64>;
pub type SlopeInputs = selection::SlopeInputs<f64>;
pub type Interval = selection::Interval<f64>;
