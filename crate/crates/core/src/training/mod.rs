//! The prediction-error cost, the three identification strategies and the
//! optimizer loop.

mod cost;
mod objective;
mod optim;
mod strategy;
mod train;

pub use cost::{cost, trajectory_cost};
pub use objective::{Evaluation, CLIPPED_LOSS};
pub use optim::OptimizerKind;
pub use strategy::{predict, StrategyKind, StrategySpec};
pub use train::{grad_check, init_model, train, train_on, TrainConfig, TrainOutcome};
