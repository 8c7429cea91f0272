//! Reverse-mode gradients through the recurrence (BPTT), optionally with a
//! differentiable feedback law closing the loop around the operator.
//!
//! The loop form covers the internal-controller interconnection:
//! `ŷ°_t = C h_t + c`, `κ_t = K(ξ_t, ŷ°_t)`, `ω_t = w_t − κ_t`,
//! `h_{t+1} = φ(A h_t + B ω_t + b)`. Without feedback, `ω_t = w_t`.

use super::operator::Realized;
use super::params::{activate, activate_deriv, StableOperatorParams};
use super::projection::projection_backward;
use crate::error::{check_finite, IciError, Result};
use crate::linalg::Mat;
use crate::seqops::Sequence;

#[derive(Debug, Clone)]
pub struct FeedbackJacobians {
    /// `∂κ/∂ξ` (u × n_ξ)
    pub k_xi: Mat,
    /// `∂κ/∂y` (u × y)
    pub k_y: Mat,
    /// `∂ξ'/∂ξ` (n_ξ × n_ξ)
    pub f_xi: Mat,
    /// `∂ξ'/∂y` (n_ξ × y)
    pub f_y: Mat,
}

/// A causal feedback law `κ_t = out(ξ_t, y_t)`, `ξ_{t+1} = next(ξ_t, y_t)`
/// with analytic Jacobians. `ξ_0 = 0`.
pub trait DifferentiableFeedback: Sync {
    fn state_dim(&self) -> usize;
    fn y_dim(&self) -> usize;
    fn u_dim(&self) -> usize;
    fn evaluate(&self, xi: &[f64], y: &[f64], kappa: &mut [f64], xi_next: &mut [f64]);
    fn jacobians(&self, xi: &[f64], y: &[f64]) -> FeedbackJacobians;
}

/// Stored forward pass of one trajectory.
#[derive(Debug, Clone)]
pub struct ForwardRecord {
    pub horizon: usize,
    /// `h_0 .. h_T`, row-major
    pub h: Vec<f64>,
    /// pre-activations producing `h_1 .. h_T`
    pub pre: Vec<f64>,
    pub omega: Vec<f64>,
    pub y: Vec<f64>,
    /// feedback states `ξ_0 .. ξ_{T−1}` when a loop is closed
    pub xi: Vec<f64>,
}

impl ForwardRecord {
    pub fn outputs(&self, out_dim: usize) -> Sequence {
        Sequence::from_flat(out_dim, self.y.clone()).expect("consistent record")
    }
}

/// Gradient with respect to the realized (projected) parameters.
#[derive(Debug, Clone)]
pub struct RealizedGrad {
    pub d_a: Mat,
    pub d_b: Mat,
    pub d_c: Mat,
    pub d_bias_h: Vec<f64>,
    pub d_bias_y: Vec<f64>,
}

impl RealizedGrad {
    pub fn zeros(p: &StableOperatorParams) -> Self {
        RealizedGrad {
            d_a: Mat::zeros(p.n_h(), p.n_h()),
            d_b: Mat::zeros(p.n_h(), p.in_dim()),
            d_c: Mat::zeros(p.out_dim(), p.n_h()),
            d_bias_h: vec![0.0; p.n_h()],
            d_bias_y: vec![0.0; p.out_dim()],
        }
    }

    pub fn add_assign(&mut self, other: &RealizedGrad) {
        let pairs: [(&mut [f64], &[f64]); 5] = [
            (&mut self.d_a.data, &other.d_a.data),
            (&mut self.d_b.data, &other.d_b.data),
            (&mut self.d_c.data, &other.d_c.data),
            (&mut self.d_bias_h, &other.d_bias_h),
            (&mut self.d_bias_y, &other.d_bias_y),
        ];
        for (dst, src) in pairs {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    /// Chains through the spectral projection and flattens in `θ` order.
    pub fn into_theta(self, realized: &Realized) -> Vec<f64> {
        let p = &realized.params;
        let d_a_raw = projection_backward(&realized.projection, &p.a_raw, p.alpha, &self.d_a);
        let mut v = Vec::with_capacity(p.num_params());
        v.extend_from_slice(&d_a_raw.data);
        v.extend_from_slice(&self.d_b.data);
        v.extend_from_slice(&self.d_c.data);
        v.extend_from_slice(&self.d_bias_h);
        v.extend_from_slice(&self.d_bias_y);
        v
    }
}

/// Runs the recurrence on `input`, closing the loop through `feedback` when
/// given, and records everything the backward pass needs.
pub fn forward(
    realized: &Realized,
    input: &Sequence,
    feedback: Option<&dyn DifferentiableFeedback>,
) -> Result<ForwardRecord> {
    let p = &realized.params;
    let (nh, du, dy) = (p.n_h(), p.in_dim(), p.out_dim());
    if input.dim() != du {
        return Err(IciError::Dimension {
            context: "forward input",
            expected: du,
            got: input.dim(),
        });
    }
    if let Some(fb) = feedback {
        if fb.u_dim() != du || fb.y_dim() != dy {
            return Err(IciError::Dimension {
                context: "forward feedback",
                expected: du,
                got: fb.u_dim(),
            });
        }
    }
    let horizon = input.horizon();
    let nx = feedback.map_or(0, |f| f.state_dim());
    let mut rec = ForwardRecord {
        horizon,
        h: vec![0.0; (horizon + 1) * nh],
        pre: vec![0.0; horizon * nh],
        omega: vec![0.0; horizon * du],
        y: vec![0.0; horizon * dy],
        xi: vec![0.0; horizon * nx],
    };
    let mut xi = vec![0.0; nx];
    let mut xi_next = vec![0.0; nx];
    let mut kappa = vec![0.0; du];
    for t in 0..horizon {
        let (h_prev, h_rest) = rec.h.split_at_mut((t + 1) * nh);
        let h_t = &h_prev[t * nh..];
        let y_t = &mut rec.y[t * dy..(t + 1) * dy];
        realized.read_out(h_t, y_t);
        check_finite(y_t, t)?;
        let omega_t = &mut rec.omega[t * du..(t + 1) * du];
        omega_t.copy_from_slice(input.step(t));
        if let Some(fb) = feedback {
            rec.xi[t * nx..(t + 1) * nx].copy_from_slice(&xi);
            fb.evaluate(&xi, y_t, &mut kappa, &mut xi_next);
            for (o, k) in omega_t.iter_mut().zip(&kappa) {
                *o -= k;
            }
            std::mem::swap(&mut xi, &mut xi_next);
        }
        let pre_t = &mut rec.pre[t * nh..(t + 1) * nh];
        realized.pre_activation(h_t, omega_t, pre_t);
        let h_next = &mut h_rest[..nh];
        for (i, (hn, pr)) in h_next.iter_mut().zip(pre_t.iter()).enumerate() {
            *hn = activate(*pr, p.is_linear_unit(i));
        }
        check_finite(h_next, t)?;
    }
    Ok(rec)
}

/// Accumulates `∂J/∂(A, B, C, b, c)` for one recorded trajectory given the
/// upstream gradient `∂J/∂ŷ°_t` (row-major, `T × d_y`).
pub fn backward_realized(
    realized: &Realized,
    rec: &ForwardRecord,
    upstream: &[f64],
    feedback: Option<&dyn DifferentiableFeedback>,
    grad: &mut RealizedGrad,
) -> Result<()> {
    let p = &realized.params;
    let (nh, du, dy) = (p.n_h(), p.in_dim(), p.out_dim());
    if upstream.len() != rec.horizon * dy {
        return Err(IciError::Contract(format!(
            "upstream gradient covers {} steps, forward record has {}",
            upstream.len() / dy.max(1),
            rec.horizon
        )));
    }
    let nx = feedback.map_or(0, |f| f.state_dim());
    let a = realized.a();
    // adjoint of h_{t+1} and ξ_{t+1}
    let mut lam_h_next = vec![0.0; nh];
    let mut lam_xi_next = vec![0.0; nx];
    let mut d_pre = vec![0.0; nh];
    let mut d_omega = vec![0.0; du];
    let mut d_y = vec![0.0; dy];
    let mut lam_h = vec![0.0; nh];
    let mut lam_xi = vec![0.0; nx];
    let mut d_kappa = vec![0.0; du];
    for t in (0..rec.horizon).rev() {
        let h_t = &rec.h[t * nh..(t + 1) * nh];
        let pre_t = &rec.pre[t * nh..(t + 1) * nh];
        let omega_t = &rec.omega[t * du..(t + 1) * du];
        for i in 0..nh {
            d_pre[i] = lam_h_next[i] * activate_deriv(pre_t[i], p.is_linear_unit(i));
        }
        for i in 0..nh {
            let g = d_pre[i];
            if g == 0.0 {
                continue;
            }
            grad.d_bias_h[i] += g;
            let row_a = &mut grad.d_a.data[i * nh..(i + 1) * nh];
            for (d, h) in row_a.iter_mut().zip(h_t) {
                *d += g * h;
            }
            let row_b = &mut grad.d_b.data[i * du..(i + 1) * du];
            for (d, w) in row_b.iter_mut().zip(omega_t) {
                *d += g * w;
            }
        }
        d_omega.fill(0.0);
        p.b.mul_t_vec_add(&d_pre, &mut d_omega);

        d_y.copy_from_slice(&upstream[t * dy..(t + 1) * dy]);
        if let Some(fb) = feedback {
            let xi_t = &rec.xi[t * nx..(t + 1) * nx];
            let y_t = &rec.y[t * dy..(t + 1) * dy];
            let jac = fb.jacobians(xi_t, y_t);
            for (dk, dw) in d_kappa.iter_mut().zip(&d_omega) {
                *dk = -dw;
            }
            jac.k_y.mul_t_vec_add(&d_kappa, &mut d_y);
            jac.f_y.mul_t_vec_add(&lam_xi_next, &mut d_y);
            lam_xi.fill(0.0);
            jac.k_xi.mul_t_vec_add(&d_kappa, &mut lam_xi);
            jac.f_xi.mul_t_vec_add(&lam_xi_next, &mut lam_xi);
            std::mem::swap(&mut lam_xi, &mut lam_xi_next);
        }
        for (o, g) in grad.d_bias_y.iter_mut().zip(&d_y) {
            *o += g;
        }
        for (r, g) in d_y.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let row_c = &mut grad.d_c.data[r * nh..(r + 1) * nh];
            for (d, h) in row_c.iter_mut().zip(h_t) {
                *d += g * h;
            }
        }
        lam_h.fill(0.0);
        a.mul_t_vec_add(&d_pre, &mut lam_h);
        p.c.mul_t_vec_add(&d_y, &mut lam_h);
        std::mem::swap(&mut lam_h, &mut lam_h_next);
    }
    Ok(())
}

/// `∂J/∂θ` for one trajectory of the open-loop operator, including the
/// spectral-projection sub-gradient.
pub fn q_backward(
    params: &StableOperatorParams,
    rec: &ForwardRecord,
    upstream: &Sequence,
) -> Result<Vec<f64>> {
    let realized = Realized::new(params.clone());
    if upstream.horizon() != rec.horizon {
        return Err(IciError::Contract(format!(
            "upstream gradient horizon {} does not match forward horizon {}",
            upstream.horizon(),
            rec.horizon
        )));
    }
    let mut g = RealizedGrad::zeros(params);
    backward_realized(&realized, rec, upstream.as_flat(), None, &mut g)?;
    Ok(g.into_theta(&realized))
}
