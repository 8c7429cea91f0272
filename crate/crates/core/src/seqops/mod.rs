//! Sequences, the causal-operator contract, composition and the recursive
//! feedback inverse.

mod elementary;
mod operator;
mod sequence;

pub use elementary::{
    negate, HistoryOperator, Identity, LinearStateSpace, Negated, StaticMap, UnitDelay,
    ZeroOperator,
};
pub use operator::{
    feedback_inverse, run, run_from_reset, series, CausalOperator, Causality, FeedbackInverse,
    OperatorHandle, Series,
};
pub use sequence::{lp_norm, Sequence};

/// Perturbs `u_t` and reports whether outputs `0..=t` (strictly causal) or
/// `0..t` (causal) stayed bit-identical.
pub fn causality_probe(op: &dyn CausalOperator, u: &Sequence, t: usize, delta: f64) -> bool {
    let mut a = op.box_clone();
    let mut b = op.box_clone();
    let base = match run_from_reset(a.as_mut(), u) {
        Ok(y) => y,
        Err(_) => return false,
    };
    let mut perturbed = u.clone();
    perturbed.step_mut(t).iter_mut().for_each(|v| *v += delta);
    let other = match run_from_reset(b.as_mut(), &perturbed) {
        Ok(y) => y,
        Err(_) => return false,
    };
    let last = if op.is_strictly_causal() { t + 1 } else { t };
    (0..last.min(u.horizon())).all(|s| base.step(s) == other.step(s))
}
