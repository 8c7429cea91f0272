use crate::error::{check_finite, Result};
use crate::seqops::{CausalOperator, Causality, OperatorHandle};

/// `x_{t+1} = x_t² + 1 + u_t`, `y_t = x_t`. Open-loop unstable for any `x̄`.
#[derive(Debug, Clone)]
pub struct ScalarUnstablePlant {
    x: f64,
    x0: f64,
}

impl ScalarUnstablePlant {
    pub fn new(x0: f64) -> Self {
        ScalarUnstablePlant { x: x0, x0 }
    }

    pub fn state(&self) -> f64 {
        self.x
    }
}

impl Default for ScalarUnstablePlant {
    fn default() -> Self {
        Self::new(0.0)
    }
}

/// Returns the noise-free `x_t`, then moves to `x_{t+1}`.
pub fn scalar_plant_step(plant: &mut ScalarUnstablePlant, u: f64) -> Result<f64> {
    let y = plant.x;
    let next = y * y + 1.0 + u;
    check_finite(&[next], 0)?;
    plant.x = next;
    Ok(y)
}

impl CausalOperator for ScalarUnstablePlant {
    fn in_dim(&self) -> usize {
        1
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn causality(&self) -> Causality {
        Causality::StrictlyCausal
    }
    fn reset(&mut self) {
        self.x = self.x0;
    }
    fn output(&self, _input: &[f64], out: &mut [f64]) {
        out[0] = self.x;
    }
    fn advance(&mut self, input: &[f64]) {
        self.x = self.x * self.x + 1.0 + input[0];
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}
