//! A parametric family of strictly causal, incrementally ℓ₂-stable operators
//! with analytic gradients.

mod checkpoint;
mod grad;
mod operator;
mod params;
mod projection;

pub use checkpoint::{Checkpoint, NamedArray, CHECKPOINT_FORMAT};
pub use grad::{
    backward_realized, forward, q_backward, DifferentiableFeedback, FeedbackJacobians,
    ForwardRecord, RealizedGrad,
};
pub use operator::{q_step, realized_step, OperatorState, Realized, StableOperator};
pub use params::{incremental_gain_bound, FamilyDims, StableOperatorParams, INIT_IO_SCALE};
pub use projection::{
    project_spectral, projection_backward, top_singular, Projection, ScaleSource, SVD_EPS,
    SVD_MAX_ITER,
};
