use rayon::prelude::*;

use super::cost::trajectory_cost;
use super::strategy::{predict_realized, StrategyKind, StrategySpec};
use crate::error::{IciError, Result};
use crate::ici::Trajectory;
use crate::stable_family::{backward_realized, forward, Realized, RealizedGrad};

/// Per-trajectory loss assigned to a diverged direct-method forward pass.
pub const CLIPPED_LOSS: f64 = 1e6;

/// Loss and gradient of the cost over a subset of trajectories.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Forward passes replaced by [`CLIPPED_LOSS`].
    pub clipped: usize,
}

pub(crate) enum EvalFailure {
    NonFinite { trajectory: usize },
    Other(IciError),
}

impl From<IciError> for EvalFailure {
    fn from(e: IciError) -> Self {
        EvalFailure::Other(e)
    }
}

pub(crate) struct Objective<'a> {
    pub strategy: &'a StrategySpec,
    pub trajectories: &'a [Trajectory],
}

impl Objective<'_> {
    pub fn check_shapes(&self) -> Result<()> {
        let p = &self.strategy.model;
        for tr in self.trajectories {
            let x = self.strategy.regressor(tr);
            if x.dim() != p.in_dim() || tr.y.dim() != p.out_dim() {
                return Err(IciError::Config(format!(
                    "model is {}→{} but data is {}→{}",
                    p.in_dim(),
                    p.out_dim(),
                    x.dim(),
                    tr.y.dim()
                )));
            }
        }
        if self.strategy.kind.uses_ici() {
            let (du, dy) = self.strategy.controller.dims();
            if du != p.in_dim() || dy != p.out_dim() {
                return Err(IciError::Config("controller does not fit the model".into()));
            }
        }
        Ok(())
    }

    /// `J` and `∂J/∂θ` over `indices`; gradients are summed in index order.
    pub fn evaluate(
        &self,
        theta: &[f64],
        indices: &[usize],
    ) -> std::result::Result<Evaluation, EvalFailure> {
        let realized = Realized::new(self.strategy.model.with_vec(theta));
        let n = indices.len() as f64;
        let parts: Vec<std::result::Result<(f64, Option<RealizedGrad>), EvalFailure>> = indices
            .par_iter()
            .map(|&i| self.one(&realized, i, n))
            .collect();
        let mut grad = RealizedGrad::zeros(&realized.params);
        let mut loss = 0.0;
        let mut clipped = 0;
        for part in parts {
            let (l, g) = part?;
            loss += l / n;
            match g {
                Some(g) => grad.add_assign(&g),
                None => clipped += 1,
            }
        }
        Ok(Evaluation {
            loss,
            grad: grad.into_theta(&realized),
            clipped,
        })
    }

    pub fn loss(&self, theta: &[f64], indices: &[usize]) -> std::result::Result<f64, EvalFailure> {
        let realized = Realized::new(self.strategy.model.with_vec(theta));
        let n = indices.len() as f64;
        let parts: Vec<_> = indices
            .par_iter()
            .map(|&i| {
                let tr = &self.trajectories[i];
                match predict_realized(self.strategy, &realized, tr) {
                    Ok(p) => Ok(trajectory_cost(&p, &tr.y)?),
                    Err(IciError::Diverged { .. }) => self.on_diverged(i),
                    Err(e) => Err(EvalFailure::Other(e)),
                }
            })
            .collect();
        let mut loss = 0.0;
        for p in parts {
            loss += p? / n;
        }
        Ok(loss)
    }

    fn on_diverged(&self, trajectory: usize) -> std::result::Result<f64, EvalFailure> {
        if self.strategy.kind == StrategyKind::S1DirectId {
            Ok(CLIPPED_LOSS)
        } else {
            Err(EvalFailure::NonFinite { trajectory })
        }
    }

    fn one(
        &self,
        realized: &Realized,
        i: usize,
        n: f64,
    ) -> std::result::Result<(f64, Option<RealizedGrad>), EvalFailure> {
        let tr = &self.trajectories[i];
        let rec = match forward(
            realized,
            self.strategy.regressor(tr),
            self.strategy.feedback(),
        ) {
            Ok(rec) => rec,
            Err(IciError::Diverged { .. }) => return Ok((self.on_diverged(i)?, None)),
            Err(e) => return Err(e.into()),
        };
        let horizon = tr.y.horizon() as f64;
        let scale = 2.0 / (horizon * n);
        let mut sse = 0.0;
        let upstream: Vec<f64> = rec
            .y
            .iter()
            .zip(tr.y.as_flat())
            .map(|(p, m)| {
                let e = p - m;
                sse += e * e;
                scale * e
            })
            .collect();
        let loss = sse / horizon;
        if !loss.is_finite() {
            return Err(EvalFailure::NonFinite { trajectory: i });
        }
        let mut g = RealizedGrad::zeros(&realized.params);
        backward_realized(realized, &rec, &upstream, self.strategy.feedback(), &mut g)?;
        Ok((loss, Some(g)))
    }
}
