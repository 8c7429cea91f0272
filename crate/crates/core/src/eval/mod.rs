//! Open- and closed-loop metrics, confidence intervals and the linear
//! consistency sweep.

mod consistency;
mod evaluate;
mod metrics;

pub use consistency::{
    consistency_sweep, implied_q, impulse_response, params_impulse_response, ConsistencyRow,
    ConsistencyTable, NoiseKind, SweepOptions, IMPULSE_LAGS,
};
pub use evaluate::{evaluate, Band, EvalOptions, Evaluation, SeedMetrics, TEST_SEED_OFFSET};
pub use metrics::{confidence_interval, r_squared, CiMethod, Metric};
