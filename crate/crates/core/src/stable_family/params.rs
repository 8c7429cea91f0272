use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::projection::{project_spectral, Projection};
use crate::error::{IciError, Result};
use crate::linalg::Mat;

/// Standard deviation multiplier for the random input and output maps.
pub const INIT_IO_SCALE: f64 = 0.1;

/// Trainable parameters `θ` of the contractive recurrence
///
/// ```text
/// y_t     = C h_t + c
/// h_{t+1} = φ(A h_t + B w_t + b),   A = project(A_raw, α)
/// ```
///
/// The first `n_linear` hidden units use the identity as `φ`, the rest use
/// `tanh`. Both are odd and 1-Lipschitz, so `‖A‖₂ ≤ α < 1` makes the
/// recurrence a contraction for every parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct StableOperatorParams {
    pub a_raw: Mat,
    pub b: Mat,
    pub c: Mat,
    pub bias_h: Vec<f64>,
    pub bias_y: Vec<f64>,
    pub alpha: f64,
    pub n_linear: usize,
}

/// Shape of a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyDims {
    pub in_dim: usize,
    pub out_dim: usize,
    pub n_h: usize,
    pub n_linear: usize,
    pub alpha: f64,
}

impl FamilyDims {
    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 || self.n_h == 0 {
            return Err(IciError::Config(
                "in_dim, out_dim and n_h must be positive".into(),
            ));
        }
        if self.n_linear > self.n_h {
            return Err(IciError::Config(format!(
                "n_linear ({}) exceeds n_h ({})",
                self.n_linear, self.n_h
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(IciError::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        let n = self.n_h;
        n * n + n * self.in_dim + self.out_dim * n + n + self.out_dim
    }
}

impl StableOperatorParams {
    pub fn zeros(dims: FamilyDims) -> Self {
        StableOperatorParams {
            a_raw: Mat::zeros(dims.n_h, dims.n_h),
            b: Mat::zeros(dims.n_h, dims.in_dim),
            c: Mat::zeros(dims.out_dim, dims.n_h),
            bias_h: vec![0.0; dims.n_h],
            bias_y: vec![0.0; dims.out_dim],
            alpha: dims.alpha,
            n_linear: dims.n_linear,
        }
    }

    /// Gaussian initialization; biases start at zero. `B` and `C` start
    /// small so the initial model is close to silent, which keeps the first
    /// closed-loop forward passes of feedback strategies bounded.
    pub fn random<R: Rng + ?Sized>(dims: FamilyDims, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        let n = dims.n_h as f64;
        let mut fill = |m: &mut Mat, std: f64| {
            for v in m.data.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = std * z;
            }
        };
        fill(&mut p.a_raw, 1.0 / n.sqrt());
        fill(&mut p.b, INIT_IO_SCALE / (dims.in_dim as f64).sqrt());
        fill(&mut p.c, INIT_IO_SCALE / n.sqrt());
        p
    }

    pub fn dims(&self) -> FamilyDims {
        FamilyDims {
            in_dim: self.b.cols,
            out_dim: self.c.rows,
            n_h: self.a_raw.rows,
            n_linear: self.n_linear,
            alpha: self.alpha,
        }
    }

    pub fn n_h(&self) -> usize {
        self.a_raw.rows
    }

    pub fn in_dim(&self) -> usize {
        self.b.cols
    }

    pub fn out_dim(&self) -> usize {
        self.c.rows
    }

    pub fn num_params(&self) -> usize {
        self.dims().num_params()
    }

    pub fn projection(&self) -> Projection {
        project_spectral(&self.a_raw, self.alpha)
    }

    /// Flat `θ`: `A_raw`, `B`, `C` (row-major), then `b`, `c`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(&self.a_raw.data);
        v.extend_from_slice(&self.b.data);
        v.extend_from_slice(&self.c.data);
        v.extend_from_slice(&self.bias_h);
        v.extend_from_slice(&self.bias_y);
        v
    }

    pub fn set_from_slice(&mut self, theta: &[f64]) {
        assert_eq!(theta.len(), self.num_params(), "parameter vector length");
        let mut off = 0;
        for dst in [
            &mut self.a_raw.data,
            &mut self.b.data,
            &mut self.c.data,
            &mut self.bias_h,
            &mut self.bias_y,
        ] {
            let len = dst.len();
            dst.copy_from_slice(&theta[off..off + len]);
            off += len;
        }
    }

    pub fn with_vec(&self, theta: &[f64]) -> Self {
        let mut p = self.clone();
        p.set_from_slice(theta);
        p
    }

    /// Whether hidden unit `i` is a linear (identity) unit.
    #[inline]
    pub fn is_linear_unit(&self, i: usize) -> bool {
        i < self.n_linear
    }

    /// Analytic incremental ℓ₂ gain bound `‖C‖₂‖B‖₂ / (1 − ‖A‖₂)`.
    pub fn incremental_gain_bound(&self) -> f64 {
        let a = self.projection().a.spectral_norm_svd();
        let b = self.b.spectral_norm_svd();
        let c = self.c.spectral_norm_svd();
        if b == 0.0 || c == 0.0 {
            return 0.0;
        }
        c * b / (1.0 - a)
    }
}

pub fn incremental_gain_bound(params: &StableOperatorParams) -> f64 {
    params.incremental_gain_bound()
}

/// Applies `φ` for unit `i`.
#[inline]
pub(crate) fn activate(pre: f64, linear: bool) -> f64 {
    if linear {
        pre
    } else {
        pre.tanh()
    }
}

/// `φ'` expressed through the pre-activation.
#[inline]
pub(crate) fn activate_deriv(pre: f64, linear: bool) -> f64 {
    if linear {
        1.0
    } else {
        let t = pre.tanh();
        1.0 - t * t
    }
}
