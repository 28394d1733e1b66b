//! Model selection across linear classes: complexity-coverage, SLOPE and
//! hold-out.

mod complexity_coverage;
mod holdout;
mod report;
mod slope;

pub use complexity_coverage::{complexity_coverage_policy, train_complexity_coverage};
pub use holdout::{holdout_losses, holdout_select, split_sizes, HOLDOUT_SPLIT};
pub use report::{Audit, ChosenClass, Method, SelectionReport};
pub use slope::{
    slope_policy_select, slope_select, zeta_coefficient, Interval, SlopeInputs, StateWeights, ZETA_SPECTRAL_CONSTANT,
};
