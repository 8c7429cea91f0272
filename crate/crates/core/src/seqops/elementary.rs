//! Basic operators: identity, zero, delay, static maps, linear state-space
//! and history-based strictly causal maps.

use std::sync::Arc;

use super::{CausalOperator, Causality, OperatorHandle};
use crate::linalg::Mat;

#[derive(Debug, Clone)]
pub struct Identity {
    dim: usize,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        Identity { dim }
    }
}

impl CausalOperator for Identity {
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn causality(&self) -> Causality {
        Causality::Causal
    }
    fn reset(&mut self) {}
    fn output(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(input);
    }
    fn advance(&mut self, _input: &[f64]) {}
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}

/// Constant zero output; strictly causal.
#[derive(Debug, Clone)]
pub struct ZeroOperator {
    in_dim: usize,
    out_dim: usize,
}

impl ZeroOperator {
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        ZeroOperator { in_dim, out_dim }
    }
}

impl CausalOperator for ZeroOperator {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn causality(&self) -> Causality {
        Causality::StrictlyCausal
    }
    fn reset(&mut self) {}
    fn output(&self, _input: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn advance(&mut self, _input: &[f64]) {}
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}

/// `y_t = g · u_{t−1}`, `y_0 = 0`.
#[derive(Debug, Clone)]
pub struct UnitDelay {
    gain: f64,
    last: Vec<f64>,
}

impl UnitDelay {
    pub fn new(dim: usize) -> Self {
        Self::with_gain(dim, 1.0)
    }

    pub fn with_gain(dim: usize, gain: f64) -> Self {
        UnitDelay {
            gain,
            last: vec![0.0; dim],
        }
    }
}

impl CausalOperator for UnitDelay {
    fn in_dim(&self) -> usize {
        self.last.len()
    }
    fn out_dim(&self) -> usize {
        self.last.len()
    }
    fn causality(&self) -> Causality {
        Causality::StrictlyCausal
    }
    fn reset(&mut self) {
        self.last.fill(0.0);
    }
    fn output(&self, _input: &[f64], out: &mut [f64]) {
        for (o, l) in out.iter_mut().zip(&self.last) {
            *o = self.gain * l;
        }
    }
    fn advance(&mut self, input: &[f64]) {
        self.last.copy_from_slice(input);
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}

/// Memoryless causal map `y_t = f(u_t)`.
#[derive(Clone)]
pub struct StaticMap {
    in_dim: usize,
    out_dim: usize,
    f: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
}

impl StaticMap {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        StaticMap {
            in_dim,
            out_dim,
            f: Arc::new(f),
        }
    }

    pub fn gain(m: Mat) -> Self {
        let (rows, cols) = (m.rows, m.cols);
        StaticMap::new(cols, rows, move |u, y| m.mul_vec(u, y))
    }
}

impl CausalOperator for StaticMap {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn causality(&self) -> Causality {
        Causality::Causal
    }
    fn reset(&mut self) {}
    fn output(&self, input: &[f64], out: &mut [f64]) {
        (self.f)(input, out);
    }
    fn advance(&mut self, _input: &[f64]) {}
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}

/// Discrete-time LTI system `x' = A x + B u`, `y = C x + D u`.
/// Strictly causal when `D` is absent.
#[derive(Debug, Clone)]
pub struct LinearStateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Option<Mat>,
    pub x0: Vec<f64>,
    x: Vec<f64>,
}

impl LinearStateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Option<Mat>) -> Self {
        let n = a.rows;
        assert_eq!(a.cols, n);
        assert_eq!(b.rows, n);
        assert_eq!(c.cols, n);
        if let Some(d) = &d {
            assert_eq!(d.rows, c.rows);
            assert_eq!(d.cols, b.cols);
        }
        LinearStateSpace {
            a,
            b,
            c,
            d,
            x0: vec![0.0; n],
            x: vec![0.0; n],
        }
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Self {
        assert_eq!(x0.len(), self.a.rows);
        self.x = x0.clone();
        self.x0 = x0;
        self
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn order(&self) -> usize {
        self.a.rows
    }
}

impl CausalOperator for LinearStateSpace {
    fn in_dim(&self) -> usize {
        self.b.cols
    }
    fn out_dim(&self) -> usize {
        self.c.rows
    }
    fn causality(&self) -> Causality {
        if self.d.is_some() {
            Causality::Causal
        } else {
            Causality::StrictlyCausal
        }
    }
    fn reset(&mut self) {
        self.x.copy_from_slice(&self.x0);
    }
    fn output(&self, input: &[f64], out: &mut [f64]) {
        self.c.mul_vec(&self.x, out);
        if let Some(d) = &self.d {
            d.mul_vec_add(input, out);
        }
    }
    fn advance(&mut self, input: &[f64]) {
        let mut next = vec![0.0; self.x.len()];
        self.a.mul_vec(&self.x, &mut next);
        self.b.mul_vec_add(input, &mut next);
        self.x = next;
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}

type HistoryFn = dyn Fn(&[Vec<f64>], &mut [f64]) + Send + Sync;

/// Strictly causal operator defined on the stored input history:
/// `y_t = f(u_{t−1:0})`, with `u_{t−1:0}` passed oldest first.
#[derive(Clone)]
pub struct HistoryOperator {
    in_dim: usize,
    out_dim: usize,
    history: Vec<Vec<f64>>,
    f: Arc<HistoryFn>,
}

impl HistoryOperator {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        f: impl Fn(&[Vec<f64>], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        HistoryOperator {
            in_dim,
            out_dim,
            history: Vec::new(),
            f: Arc::new(f),
        }
    }
}

impl CausalOperator for HistoryOperator {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn causality(&self) -> Causality {
        Causality::StrictlyCausal
    }
    fn reset(&mut self) {
        self.history.clear();
    }
    fn output(&self, _input: &[f64], out: &mut [f64]) {
        (self.f)(&self.history, out);
    }
    fn advance(&mut self, input: &[f64]) {
        self.history.push(input.to_vec());
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}

/// `−op`, preserving causality.
#[derive(Clone)]
pub struct Negated {
    inner: OperatorHandle,
}

pub fn negate(inner: OperatorHandle) -> OperatorHandle {
    Box::new(Negated { inner })
}

impl CausalOperator for Negated {
    fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.inner.out_dim()
    }
    fn causality(&self) -> Causality {
        self.inner.causality()
    }
    fn reset(&mut self) {
        self.inner.reset();
    }
    fn output(&self, input: &[f64], out: &mut [f64]) {
        self.inner.output(input, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }
    fn advance(&mut self, input: &[f64]) {
        self.inner.advance(input);
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(self.clone())
    }
}
