//! The internal-controller interconnection, true closed loops, dataset
//! collection and the true internal operator of a stabilized plant.

mod closed_loop;
mod dataset;
mod model;
mod true_q;

pub use closed_loop::{closed_loop_run, open_loop_run, run_loop, ClosedLoopSystem};
pub use dataset::{
    collect_dataset, hash_dataset_dir, sample_disturbance, sample_excitation, trajectory_rng,
    Dataset, DatasetMeta, Trajectory, DATASET_FORMAT,
};
pub use model::{ici_step, IciLoopTrace, IciModel};
pub use true_q::construct_true_q;

use crate::error::{IciError, Result};
use crate::seqops::Sequence;

fn check_loop_inputs(du: usize, dy: usize, r: &Sequence, v: &Sequence) -> Result<()> {
    if r.dim() != du {
        return Err(IciError::Dimension {
            context: "closed loop r",
            expected: du,
            got: r.dim(),
        });
    }
    if v.dim() != dy {
        return Err(IciError::Dimension {
            context: "closed loop v",
            expected: dy,
            got: v.dim(),
        });
    }
    if r.horizon() != v.horizon() {
        return Err(IciError::Dimension {
            context: "closed loop horizons",
            expected: r.horizon(),
            got: v.horizon(),
        });
    }
    Ok(())
}
