use serde::{Deserialize, Serialize};

use crate::error::{check_finite, IciError, Result};
use crate::seqops::{CausalOperator, Causality, OperatorHandle};

/// Physical constants and initial condition of the point-mass robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    pub mass_kg: f64,
    pub ts_seconds: f64,
    pub b1: f64,
    pub b2: f64,
    pub position0_m: [f64; 2],
    pub velocity0_mps: [f64; 2],
}

impl Default for RobotParams {
    fn default() -> Self {
        // b2 = 0.1 puts the initial speed exactly on the drag reversal
        // point b1/b2 = 10, where excitation drives the loop unstable.
        RobotParams {
            mass_kg: 1.0,
            ts_seconds: 0.05,
            b1: 1.0,
            b2: 0.01,
            position0_m: [-2.0, -2.0],
            velocity0_mps: [10.0, 0.0],
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_kg > 0.0 && self.ts_seconds > 0.0) {
            return Err(IciError::Config(
                "robot mass and sampling time must be positive".into(),
            ));
        }
        if !(0.0 < self.b2 && self.b2 < self.b1) {
            return Err(IciError::Config("robot drag needs 0 < b2 < b1".into()));
        }
        Ok(())
    }
}

/// `C(x₂) = b₁ x₂ − b₂ ‖x₂‖ x₂`
pub fn drag(b1: f64, b2: f64, x2: [f64; 2]) -> [f64; 2] {
    let speed = x2[0].hypot(x2[1]);
    let k = b1 - b2 * speed;
    [k * x2[0], k * x2[1]]
}

/// Forward-Euler point mass with nonlinear drag. Output is position.
#[derive(Debug, Clone)]
pub struct PointMassRobot {
    pub params: RobotParams,
    x1: [f64; 2],
    x2: [f64; 2],
}

impl PointMassRobot {
    pub fn new(params: RobotParams) -> Self {
        PointMassRobot {
            params,
            x1: params.position0_m,
            x2: params.velocity0_mps,
        }
    }

    pub fn with_state(params: RobotParams, x1: [f64; 2], x2: [f64; 2]) -> Self {
        PointMassRobot { params, x1, x2 }
    }

    pub fn position(&self) -> [f64; 2] {
        self.x1
    }

    pub fn velocity(&self) -> [f64; 2] {
        self.x2
    }

    fn update(&mut self, u: &[f64]) {
        let p = &self.params;
        let c = drag(p.b1, p.b2, self.x2);
        let k = p.ts_seconds / p.mass_kg;
        for i in 0..2 {
            self.x1[i] += p.ts_seconds * self.x2[i];
            self.x2[i] += k * (-c[i] + u[i]);
        }
    }
}

/// Returns `y_t = x₁,t + v_t` from the pre-update state, then applies `u_t`.
pub fn robot_step(robot: &mut PointMassRobot, u: [f64; 2], v: [f64; 2]) -> Result<[f64; 2]> {
    let y = [robot.x1[0] + v[0], robot.x1[1] + v[1]];
    robot.update(&u);
    check_finite(&robot.x1, 0)?;
    check_finite(&robot.x2, 0)?;
    Ok(y)
}

impl CausalOperator for PointMassRobot {
    fn in_dim(&self) -> usize {
        2
    }
    fn out_dim(&self) -> usize {
        2
    }
    fn causality(&self) -> Causality {
        Causality::StrictlyCausal
    }
    fn reset(&mut self) {
        self.x1 = self.params.position0_m;
        self.x2 = self.params.velocity0_mps;
    }
    fn output(&self, _input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.x1);
    }
    fn advance(&mut self, input: &[f64]) {
        self.update(input);
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}
