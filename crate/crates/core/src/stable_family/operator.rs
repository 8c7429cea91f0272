use std::sync::Arc;

use super::params::{activate, StableOperatorParams};
use super::projection::Projection;
use crate::linalg::Mat;
use crate::seqops::{CausalOperator, Causality, OperatorHandle};

/// Parameters with the spectral projection already applied.
#[derive(Debug, Clone)]
pub struct Realized {
    pub params: StableOperatorParams,
    pub projection: Projection,
}

impl Realized {
    pub fn new(params: StableOperatorParams) -> Self {
        let projection = params.projection();
        Realized { params, projection }
    }

    #[inline]
    pub fn a(&self) -> &Mat {
        &self.projection.a
    }

    pub fn n_h(&self) -> usize {
        self.params.n_h()
    }

    /// `y = C h + c`
    #[inline]
    pub fn read_out(&self, h: &[f64], y: &mut [f64]) {
        self.params.c.mul_vec(h, y);
        for (o, c) in y.iter_mut().zip(&self.params.bias_y) {
            *o += c;
        }
    }

    /// Pre-activation `A h + B w + b`.
    #[inline]
    pub fn pre_activation(&self, h: &[f64], w: &[f64], pre: &mut [f64]) {
        self.projection.a.mul_vec(h, pre);
        self.params.b.mul_vec_add(w, pre);
        for (p, b) in pre.iter_mut().zip(&self.params.bias_h) {
            *p += b;
        }
    }

    #[inline]
    pub fn next_state(&self, h: &[f64], w: &[f64], next: &mut [f64]) {
        self.pre_activation(h, w, next);
        for (i, v) in next.iter_mut().enumerate() {
            *v = activate(*v, self.params.is_linear_unit(i));
        }
    }
}

/// Hidden state `h`; reset means the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorState {
    pub h: Vec<f64>,
}

impl OperatorState {
    pub fn zeros(n_h: usize) -> Self {
        OperatorState { h: vec![0.0; n_h] }
    }
}

/// One step of `Q̂^θ`: output from the current state, then the state update.
pub fn q_step(
    params: &StableOperatorParams,
    state: &OperatorState,
    w: &[f64],
) -> (Vec<f64>, OperatorState) {
    let realized = Realized::new(params.clone());
    realized_step(&realized, state, w)
}

pub fn realized_step(
    realized: &Realized,
    state: &OperatorState,
    w: &[f64],
) -> (Vec<f64>, OperatorState) {
    assert_eq!(w.len(), realized.params.in_dim(), "q_step input dimension");
    let mut y = vec![0.0; realized.params.out_dim()];
    realized.read_out(&state.h, &mut y);
    let mut next = OperatorState::zeros(realized.n_h());
    realized.next_state(&state.h, w, &mut next.h);
    (y, next)
}

/// `Q̂^θ` behind the [`CausalOperator`] contract. Strictly causal.
#[derive(Debug, Clone)]
pub struct StableOperator {
    realized: Arc<Realized>,
    h: Vec<f64>,
    scratch: Vec<f64>,
}

impl StableOperator {
    pub fn new(params: StableOperatorParams) -> Self {
        Self::from_realized(Arc::new(Realized::new(params)))
    }

    pub fn from_realized(realized: Arc<Realized>) -> Self {
        let n = realized.n_h();
        StableOperator {
            realized,
            h: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    pub fn params(&self) -> &StableOperatorParams {
        &self.realized.params
    }

    pub fn state(&self) -> &[f64] {
        &self.h
    }
}

impl CausalOperator for StableOperator {
    fn in_dim(&self) -> usize {
        self.realized.params.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.realized.params.out_dim()
    }
    fn causality(&self) -> Causality {
        Causality::StrictlyCausal
    }
    fn reset(&mut self) {
        self.h.fill(0.0);
    }
    fn output(&self, _input: &[f64], out: &mut [f64]) {
        self.realized.read_out(&self.h, out);
    }
    fn advance(&mut self, input: &[f64]) {
        self.realized.next_state(&self.h, input, &mut self.scratch);
        std::mem::swap(&mut self.h, &mut self.scratch);
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}
