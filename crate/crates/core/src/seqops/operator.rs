use serde::{Deserialize, Serialize};

use super::Sequence;
use crate::error::{IciError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Causality {
    Causal,
    StrictlyCausal,
}

/// Step-wise causal operator `u_t ↦ y_t` with internal memory.
///
/// Each time step is split into two phases. [`output`](Self::output) returns
/// `y_t` from the current state and the current input without mutating
/// anything; [`advance`](Self::advance) consumes `u_t` and moves the state to
/// step `t + 1`. A strictly causal operator must ignore the input in
/// `output`, so its `y_t` can be read before `u_t` exists. Feedback loops
/// rely on this to resolve step by step.
pub trait CausalOperator: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn causality(&self) -> Causality;

    /// Restores the nominal initial condition.
    fn reset(&mut self);

    fn output(&self, input: &[f64], out: &mut [f64]);

    fn advance(&mut self, input: &[f64]);

    fn box_clone(&self) -> Box<dyn CausalOperator>;

    /// Output at the current step of a strictly causal operator.
    fn peek(&self, out: &mut [f64]) {
        debug_assert_eq!(self.causality(), Causality::StrictlyCausal);
        let zeros = vec![0.0; self.in_dim()];
        self.output(&zeros, out);
    }

    /// `output` followed by `advance`.
    fn step(&mut self, input: &[f64], out: &mut [f64]) {
        self.output(input, out);
        self.advance(input);
    }

    fn is_strictly_causal(&self) -> bool {
        self.causality() == Causality::StrictlyCausal
    }
}

pub type OperatorHandle = Box<dyn CausalOperator>;

impl Clone for Box<dyn CausalOperator> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Drives `op` over a whole sequence from its current state.
pub fn run(op: &mut dyn CausalOperator, u: &Sequence) -> Result<Sequence> {
    if u.dim() != op.in_dim() {
        return Err(IciError::Dimension {
            context: "run",
            expected: op.in_dim(),
            got: u.dim(),
        });
    }
    let mut y = Sequence::zeros(u.horizon(), op.out_dim());
    for t in 0..u.horizon() {
        op.step(u.step(t), y.step_mut(t));
    }
    Ok(y)
}

/// Resets `op`, then runs it.
pub fn run_from_reset(op: &mut dyn CausalOperator, u: &Sequence) -> Result<Sequence> {
    op.reset();
    run(op, u)
}

/// Series composition `b ∘ a`.
pub struct Series {
    a: OperatorHandle,
    b: OperatorHandle,
    buf: Vec<f64>,
}

impl Series {
    fn intermediate(&self, input: &[f64]) -> Vec<f64> {
        let mut mid = vec![0.0; self.a.out_dim()];
        self.a.output(input, &mut mid);
        mid
    }
}

/// `b(a(·))`; strictly causal if either factor is.
pub fn series(a: OperatorHandle, b: OperatorHandle) -> Result<OperatorHandle> {
    if a.out_dim() != b.in_dim() {
        return Err(IciError::Dimension {
            context: "series",
            expected: b.in_dim(),
            got: a.out_dim(),
        });
    }
    let buf = vec![0.0; a.out_dim()];
    Ok(Box::new(Series { a, b, buf }))
}

impl CausalOperator for Series {
    fn in_dim(&self) -> usize {
        self.a.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.b.out_dim()
    }
    fn causality(&self) -> Causality {
        if self.a.is_strictly_causal() || self.b.is_strictly_causal() {
            Causality::StrictlyCausal
        } else {
            Causality::Causal
        }
    }
    fn reset(&mut self) {
        self.a.reset();
        self.b.reset();
    }
    fn output(&self, input: &[f64], out: &mut [f64]) {
        let mid = self.intermediate(input);
        self.b.output(&mid, out);
    }
    fn advance(&mut self, input: &[f64]) {
        let mut mid = std::mem::take(&mut self.buf);
        self.a.output(input, &mut mid);
        self.a.advance(input);
        self.b.advance(&mid);
        self.buf = mid;
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(Series {
            a: self.a.box_clone(),
            b: self.b.box_clone(),
            buf: self.buf.clone(),
        })
    }
}

/// Inverse of `Υ = I + Υ°` for strictly causal `Υ°`:
/// `b_t = a_t − υ°_t(b_{t−1:0})`.
///
/// The wrapped operator keeps whatever memory it needs (finite state for
/// state-space operators, full history for history-based ones).
pub struct FeedbackInverse {
    inner: OperatorHandle,
    buf: Vec<f64>,
}

pub fn feedback_inverse(upsilon_o: OperatorHandle) -> Result<OperatorHandle> {
    if !upsilon_o.is_strictly_causal() {
        return Err(IciError::Contract(
            "feedback_inverse requires a strictly causal Υ°".into(),
        ));
    }
    if upsilon_o.in_dim() != upsilon_o.out_dim() {
        return Err(IciError::Dimension {
            context: "feedback_inverse",
            expected: upsilon_o.in_dim(),
            got: upsilon_o.out_dim(),
        });
    }
    let buf = vec![0.0; upsilon_o.out_dim()];
    Ok(Box::new(FeedbackInverse {
        inner: upsilon_o,
        buf,
    }))
}

impl CausalOperator for FeedbackInverse {
    fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.inner.out_dim()
    }
    fn causality(&self) -> Causality {
        Causality::Causal
    }
    fn reset(&mut self) {
        self.inner.reset();
    }
    fn output(&self, input: &[f64], out: &mut [f64]) {
        self.inner.peek(out);
        for (o, a) in out.iter_mut().zip(input) {
            *o = a - *o;
        }
    }
    fn advance(&mut self, input: &[f64]) {
        let mut b = std::mem::take(&mut self.buf);
        self.output(input, &mut b);
        self.inner.advance(&b);
        self.buf = b;
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(FeedbackInverse {
            inner: self.inner.box_clone(),
            buf: self.buf.clone(),
        })
    }
}
