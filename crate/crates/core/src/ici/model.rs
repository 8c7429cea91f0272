use crate::error::{check_finite, IciError, Result};
use crate::seqops::{CausalOperator, Causality, OperatorHandle, Sequence};

/// `Ĝ` realized as `ŷ° = Q̂(û − K(ŷ°))`.
///
/// Well-posed because `Q̂` is strictly causal: its output at step `t` is read
/// before `û_t` is consumed, so the loop resolves without solving anything.
pub struct IciModel {
    q: OperatorHandle,
    k: OperatorHandle,
    omega: Vec<f64>,
    kappa: Vec<f64>,
    y: Vec<f64>,
}

impl IciModel {
    pub fn new(q: OperatorHandle, k: OperatorHandle) -> Result<Self> {
        if !q.is_strictly_causal() {
            return Err(IciError::Contract("Q̂ must be strictly causal".into()));
        }
        if k.in_dim() != q.out_dim() {
            return Err(IciError::Dimension {
                context: "IciModel: K input vs Q̂ output",
                expected: q.out_dim(),
                got: k.in_dim(),
            });
        }
        if k.out_dim() != q.in_dim() {
            return Err(IciError::Dimension {
                context: "IciModel: K output vs Q̂ input",
                expected: q.in_dim(),
                got: k.out_dim(),
            });
        }
        Ok(IciModel {
            omega: vec![0.0; q.in_dim()],
            kappa: vec![0.0; q.in_dim()],
            y: vec![0.0; q.out_dim()],
            q,
            k,
        })
    }

    pub fn q(&self) -> &dyn CausalOperator {
        self.q.as_ref()
    }

    /// `ω̂` fed to `Q̂` at the most recent step.
    pub fn last_omega(&self) -> &[f64] {
        &self.omega
    }

    fn advance_inner(&mut self, u_hat: &[f64]) {
        self.q.peek(&mut self.y);
        self.k.output(&self.y, &mut self.kappa);
        self.k.advance(&self.y);
        for ((o, u), k) in self.omega.iter_mut().zip(u_hat).zip(&self.kappa) {
            *o = u - k;
        }
        self.q.advance(&self.omega);
    }
}

/// One step of the recursion; returns `ŷ°_t`.
pub fn ici_step(model: &mut IciModel, u_hat: &[f64]) -> Result<Vec<f64>> {
    if u_hat.len() != model.in_dim() {
        return Err(IciError::Dimension {
            context: "ici_step",
            expected: model.in_dim(),
            got: u_hat.len(),
        });
    }
    let mut y = vec![0.0; model.out_dim()];
    model.q.peek(&mut y);
    model.advance_inner(u_hat);
    Ok(y)
}

impl CausalOperator for IciModel {
    fn in_dim(&self) -> usize {
        self.q.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.q.out_dim()
    }
    fn causality(&self) -> Causality {
        Causality::StrictlyCausal
    }
    fn reset(&mut self) {
        self.q.reset();
        self.k.reset();
        self.omega.fill(0.0);
    }
    fn output(&self, _input: &[f64], out: &mut [f64]) {
        self.q.peek(out);
    }
    fn advance(&mut self, input: &[f64]) {
        self.advance_inner(input);
    }
    fn box_clone(&self) -> OperatorHandle {
        Box::new(IciModel {
            q: self.q.box_clone(),
            k: self.k.box_clone(),
            omega: self.omega.clone(),
            kappa: self.kappa.clone(),
            y: self.y.clone(),
        })
    }
}

/// Signals of `Ĝ` in closed loop with an external copy of `K`.
#[derive(Debug, Clone)]
pub struct IciLoopTrace {
    pub u: Sequence,
    pub y: Sequence,
    pub omega: Sequence,
}

impl IciModel {
    /// `y = Ĝ(u) + v`, `u = r + K(y)`, from reset, recording `ω̂`.
    pub fn closed_loop_run(
        &mut self,
        k: &mut dyn CausalOperator,
        r: &Sequence,
        v: &Sequence,
    ) -> Result<IciLoopTrace> {
        let (du, dy) = (self.in_dim(), self.out_dim());
        super::check_loop_inputs(du, dy, r, v)?;
        self.reset();
        k.reset();
        let horizon = r.horizon();
        let mut trace = IciLoopTrace {
            u: Sequence::zeros(horizon, du),
            y: Sequence::zeros(horizon, dy),
            omega: Sequence::zeros(horizon, du),
        };
        let mut kappa = vec![0.0; du];
        for t in 0..horizon {
            let y_t = trace.y.step_mut(t);
            self.q.peek(y_t);
            for (y, n) in y_t.iter_mut().zip(v.step(t)) {
                *y += n;
            }
            check_finite(y_t, t)?;
            k.output(y_t, &mut kappa);
            k.advance(y_t);
            let u_t = trace.u.step_mut(t);
            for ((u, r), k) in u_t.iter_mut().zip(r.step(t)).zip(&kappa) {
                *u = r + k;
            }
            check_finite(u_t, t)?;
            self.advance_inner(trace.u.step(t));
            trace.omega.step_mut(t).copy_from_slice(&self.omega);
        }
        Ok(trace)
    }
}
