use crate::error::{check_finite, IciError, Result};
use crate::plants::{Benchmark, NoiseSpec};
use crate::seqops::{CausalOperator, OperatorHandle, Sequence};

/// `y = G(u) + v`, `u = r + K(y)` with a strictly causal `G`.
#[derive(Clone)]
pub struct ClosedLoopSystem {
    pub plant: OperatorHandle,
    pub k: OperatorHandle,
    pub noise: NoiseSpec,
    pub plant_id: String,
    pub controller_id: String,
}

impl ClosedLoopSystem {
    pub fn new(plant: OperatorHandle, k: OperatorHandle, noise: NoiseSpec) -> Result<Self> {
        if !plant.is_strictly_causal() {
            return Err(IciError::Contract(
                "closed loop needs a strictly causal plant".into(),
            ));
        }
        if k.in_dim() != plant.out_dim() || k.out_dim() != plant.in_dim() {
            return Err(IciError::Dimension {
                context: "ClosedLoopSystem",
                expected: plant.in_dim(),
                got: k.out_dim(),
            });
        }
        Ok(ClosedLoopSystem {
            plant,
            k,
            noise,
            plant_id: "custom".into(),
            controller_id: "custom".into(),
        })
    }

    pub fn from_benchmark(b: &Benchmark) -> Result<Self> {
        let mut cl = Self::new(b.plant.clone(), b.controller.boxed(), b.noise.clone())?;
        cl.plant_id = b.id.to_string();
        cl.controller_id = b.controller.id().to_string();
        Ok(cl)
    }

    pub fn u_dim(&self) -> usize {
        self.plant.in_dim()
    }

    pub fn y_dim(&self) -> usize {
        self.plant.out_dim()
    }
}

/// Runs the loop from the plant's initial condition. Plant and controller
/// are reset first.
pub fn closed_loop_run(
    cl: &mut ClosedLoopSystem,
    r: &Sequence,
    v: &Sequence,
) -> Result<(Sequence, Sequence)> {
    run_loop(cl.plant.as_mut(), cl.k.as_mut(), r, v)
}

pub fn run_loop(
    plant: &mut dyn CausalOperator,
    k: &mut dyn CausalOperator,
    r: &Sequence,
    v: &Sequence,
) -> Result<(Sequence, Sequence)> {
    let (du, dy) = (plant.in_dim(), plant.out_dim());
    super::check_loop_inputs(du, dy, r, v)?;
    plant.reset();
    k.reset();
    let horizon = r.horizon();
    let mut u = Sequence::zeros(horizon, du);
    let mut y = Sequence::zeros(horizon, dy);
    let mut kappa = vec![0.0; du];
    for t in 0..horizon {
        let y_t = y.step_mut(t);
        plant.peek(y_t);
        for (a, n) in y_t.iter_mut().zip(v.step(t)) {
            *a += n;
        }
        check_finite(y_t, t)?;
        k.output(y_t, &mut kappa);
        k.advance(y_t);
        let u_t = u.step_mut(t);
        for ((a, r), k) in u_t.iter_mut().zip(r.step(t)).zip(&kappa) {
            *a = r + k;
        }
        check_finite(u_t, t)?;
        plant.advance(u_t);
    }
    Ok((u, y))
}

/// Open-loop response `G(u)` from reset, with divergence detection.
pub fn open_loop_run(plant: &mut dyn CausalOperator, u: &Sequence) -> Result<Sequence> {
    if u.dim() != plant.in_dim() {
        return Err(IciError::Dimension {
            context: "open_loop_run",
            expected: plant.in_dim(),
            got: u.dim(),
        });
    }
    plant.reset();
    let mut y = Sequence::zeros(u.horizon(), plant.out_dim());
    for t in 0..u.horizon() {
        let y_t = y.step_mut(t);
        plant.step(u.step(t), y_t);
        check_finite(y_t, t)?;
    }
    Ok(y)
}
