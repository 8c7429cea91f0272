use serde::{Deserialize, Serialize};

use crate::error::{IciError, Result};
use crate::linalg::Mat;
use crate::seqops::{CausalOperator, Causality, OperatorHandle};
use crate::stable_family::{DifferentiableFeedback, FeedbackJacobians};

/// Known controller `K`: `u_t = r_t + K_t(y_{t:0})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerSpec {
    /// `K(y) = −y² − 1 + 0.5 y` (scalar).
    ScalarPoly,
    /// `K(y) = diag(κ₁, κ₂)(y* − y)`.
    Proportional2d {
        kappa1: f64,
        kappa2: f64,
        #[serde(default)]
        target: [f64; 2],
    },
    /// `ξ' = A ξ + B y`, `κ = C ξ + D y`. A static gain has zero states.
    LinearSs {
        a: Mat,
        b: Mat,
        c: Mat,
        d: Mat,
    },
    Zero {
        u_dim: usize,
        y_dim: usize,
    },
}

impl ControllerSpec {
    pub fn static_gain(d: Mat) -> Self {
        let (u, y) = (d.rows, d.cols);
        ControllerSpec::LinearSs {
            a: Mat::zeros(0, 0),
            b: Mat::zeros(0, y),
            c: Mat::zeros(u, 0),
            d,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            ControllerSpec::ScalarPoly => "scalar_poly",
            ControllerSpec::Proportional2d { .. } => "proportional_2d",
            ControllerSpec::LinearSs { .. } => "linear_ss",
            ControllerSpec::Zero { .. } => "zero",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ControllerSpec::LinearSs { a, b, c, d } => {
                let n = a.rows;
                if a.cols != n || b.rows != n || c.cols != n || d.rows != c.rows || d.cols != b.cols
                {
                    return Err(IciError::Config("linear controller shapes disagree".into()));
                }
                Ok(())
            }
            ControllerSpec::Proportional2d { kappa1, kappa2, .. } => {
                if *kappa1 < 0.0 || *kappa2 < 0.0 {
                    return Err(IciError::Config(
                        "proportional gains must be nonnegative".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            ControllerSpec::ScalarPoly => (1, 1),
            ControllerSpec::Proportional2d { .. } => (2, 2),
            ControllerSpec::LinearSs { d, .. } => (d.rows, d.cols),
            ControllerSpec::Zero { u_dim, y_dim } => (*u_dim, *y_dim),
        }
    }

    /// Certified incremental ℓ₂ gain, where one is available.
    pub fn certified_ifg(&self) -> Option<f64> {
        match self {
            ControllerSpec::ScalarPoly => None,
            ControllerSpec::Proportional2d { kappa1, kappa2, .. } => Some(kappa1.max(*kappa2)),
            ControllerSpec::Zero { .. } => Some(0.0),
            ControllerSpec::LinearSs { a, b, c, d } => {
                let dn = d.spectral_norm_svd();
                if a.rows == 0 {
                    return Some(dn);
                }
                let an = a.spectral_norm_svd();
                if an < 1.0 {
                    Some(dn + c.spectral_norm_svd() * b.spectral_norm_svd() / (1.0 - an))
                } else {
                    None
                }
            }
        }
    }

    pub fn operator(&self) -> ControllerOp {
        ControllerOp {
            spec: self.clone(),
            xi: vec![0.0; self.state_dim()],
        }
    }

    pub fn boxed(&self) -> OperatorHandle {
        Box::new(self.operator())
    }
}

impl DifferentiableFeedback for ControllerSpec {
    fn state_dim(&self) -> usize {
        match self {
            ControllerSpec::LinearSs { a, .. } => a.rows,
            _ => 0,
        }
    }

    fn y_dim(&self) -> usize {
        self.dims().1
    }

    fn u_dim(&self) -> usize {
        self.dims().0
    }

    fn evaluate(&self, xi: &[f64], y: &[f64], kappa: &mut [f64], xi_next: &mut [f64]) {
        match self {
            ControllerSpec::ScalarPoly => {
                kappa[0] = -y[0] * y[0] - 1.0 + 0.5 * y[0];
            }
            ControllerSpec::Proportional2d {
                kappa1,
                kappa2,
                target,
            } => {
                kappa[0] = kappa1 * (target[0] - y[0]);
                kappa[1] = kappa2 * (target[1] - y[1]);
            }
            ControllerSpec::LinearSs { a, b, c, d } => {
                c.mul_vec(xi, kappa);
                d.mul_vec_add(y, kappa);
                a.mul_vec(xi, xi_next);
                b.mul_vec_add(y, xi_next);
            }
            ControllerSpec::Zero { .. } => kappa.fill(0.0),
        }
    }

    fn jacobians(&self, _xi: &[f64], y: &[f64]) -> FeedbackJacobians {
        let (du, dy) = self.dims();
        let nx = self.state_dim();
        match self {
            ControllerSpec::ScalarPoly => FeedbackJacobians {
                k_xi: Mat::zeros(1, 0),
                k_y: Mat::from_rows(1, 1, vec![-2.0 * y[0] + 0.5]),
                f_xi: Mat::zeros(0, 0),
                f_y: Mat::zeros(0, 1),
            },
            ControllerSpec::Proportional2d { kappa1, kappa2, .. } => FeedbackJacobians {
                k_xi: Mat::zeros(2, 0),
                k_y: Mat::diag(&[-kappa1, -kappa2]),
                f_xi: Mat::zeros(0, 0),
                f_y: Mat::zeros(0, 2),
            },
            ControllerSpec::LinearSs { a, b, c, d } => FeedbackJacobians {
                k_xi: c.clone(),
                k_y: d.clone(),
                f_xi: a.clone(),
                f_y: b.clone(),
            },
            ControllerSpec::Zero { .. } => FeedbackJacobians {
                k_xi: Mat::zeros(du, nx),
                k_y: Mat::zeros(du, dy),
                f_xi: Mat::zeros(nx, nx),
                f_y: Mat::zeros(nx, dy),
            },
        }
    }
}

/// A controller instance behind the [`CausalOperator`] contract (causal).
#[derive(Debug, Clone)]
pub struct ControllerOp {
    spec: ControllerSpec,
    xi: Vec<f64>,
}

impl ControllerOp {
    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }
}

impl CausalOperator for ControllerOp {
    fn in_dim(&self) -> usize {
        self.spec.y_dim()
    }
    fn out_dim(&self) -> usize {
        self.spec.u_dim()
    }
    fn causality(&self) -> Causality {
        Causality::Causal
    }
    fn reset(&mut self) {
        self.xi.fill(0.0);
    }
    fn output(&self, input: &[f64], out: &mut [f64]) {
        let mut scratch = vec![0.0; self.xi.len()];
        self.spec.evaluate(&self.xi, input, out, &mut scratch);
    }
    fn advance(&mut self, input: &[f64]) {
        if self.xi.is_empty() {
            return;
        }
        let mut kappa = vec![0.0; self.spec.u_dim()];
        let mut next = vec![0.0; self.xi.len()];
        self.spec.evaluate(&self.xi, input, &mut kappa, &mut next);
        self.xi = next;
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}
