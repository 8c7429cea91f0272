//! SISO linear testbed with an open-loop unstable plant and a static
//! stabilizing controller. The true internal operator is second order and
//! lies inside the linear subfamily, so parameter error is measurable.

use super::controller::ControllerSpec;
use crate::linalg::Mat;
use crate::seqops::LinearStateSpace;
use crate::stable_family::{FamilyDims, StableOperatorParams};

/// Alpha used for the linear subfamily on this benchmark.
pub const LINEAR_BENCH_ALPHA: f64 = 0.95;

#[derive(Debug, Clone)]
pub struct LinearBenchmark {
    pub plant: LinearStateSpace,
    pub controller: ControllerSpec,
    pub true_q: StableOperatorParams,
}

/// Plant poles 1.25 and 0.4; `u = r − y` moves them to 0.6 and 0.3.
pub fn linear_benchmark() -> LinearBenchmark {
    let a = Mat::from_rows(2, 2, vec![1.65, -0.5, 1.0, 0.0]);
    let b = Mat::from_rows(2, 1, vec![1.0, 0.0]);
    let c = Mat::from_rows(1, 2, vec![0.75, -0.32]);
    let plant = LinearStateSpace::new(a, b, c.clone(), None);
    let controller = ControllerSpec::static_gain(Mat::from_rows(1, 1, vec![-1.0]));

    // Q̃(z) = (0.75 z − 0.32) / ((z − p1)(z − p2)) split into residues,
    // realized diagonally with balanced input/output weights.
    let (p1, p2) = (0.6, 0.3);
    let num = |z: f64| c.data[0] * z + c.data[1];
    let residues = [num(p1) / (p1 - p2), num(p2) / (p2 - p1)];
    let dims = FamilyDims {
        in_dim: 1,
        out_dim: 1,
        n_h: 2,
        n_linear: 2,
        alpha: LINEAR_BENCH_ALPHA,
    };
    let mut true_q = StableOperatorParams::zeros(dims);
    true_q.a_raw = Mat::diag(&[p1 / LINEAR_BENCH_ALPHA, p2 / LINEAR_BENCH_ALPHA]);
    for (i, r) in residues.iter().enumerate() {
        true_q.b.data[i] = r.abs().sqrt();
        true_q.c.data[i] = r.signum() * r.abs().sqrt();
    }
    LinearBenchmark {
        plant,
        controller,
        true_q,
    }
}
