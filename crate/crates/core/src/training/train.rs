use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{EvalFailure, Evaluation, Objective};
use super::optim::{Adam, LbfgsMemory, OptimizerKind};
use super::strategy::StrategySpec;
use crate::error::{IciError, Result};
use crate::ici::{Dataset, Trajectory};
use crate::linalg::dot;
use crate::stable_family::{FamilyDims, StableOperatorParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lbfgs_memory: usize,
    /// Trajectories per gradient step; 0 means the full dataset.
    pub batch_size: usize,
    pub seed: u64,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lbfgs_memory: 20,
            batch_size: 0,
            seed: 0,
            patience: 50,
            min_delta: 1e-9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(IciError::Config(format!("train: {m}")));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.patience == 0 || self.lbfgs_memory == 0 {
            return bad("patience and lbfgs_memory must be positive");
        }
        if !(self.min_delta >= 0.0) {
            return bad("min_delta must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest recorded training cost.
    pub params: StableOperatorParams,
    /// `J` after each epoch; entry 0 is the initial parameters.
    pub loss_curve: Vec<f64>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub stopped_early: bool,
    /// Forward passes replaced by the clipped loss, summed over all evaluations.
    pub clipped_forward_passes: usize,
}

/// Random initial parameters for the family, seeded by `seed`.
pub fn init_model(dims: FamilyDims, seed: u64) -> StableOperatorParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StableOperatorParams::random(dims, &mut rng)
}

fn lift(epoch: usize) -> impl Fn(EvalFailure) -> IciError {
    move |f| match f {
        EvalFailure::NonFinite { trajectory } => IciError::NonFiniteLoss { epoch, trajectory },
        EvalFailure::Other(e) => e,
    }
}

/// Minimizes the cost over `dataset` starting from `strategy.model`.
pub fn train(
    strategy: &StrategySpec,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_on(strategy, &dataset.trajectories, cfg)
}

pub fn train_on(
    strategy: &StrategySpec,
    trajectories: &[Trajectory],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if trajectories.is_empty() {
        return Err(IciError::Config("empty dataset".into()));
    }
    let obj = Objective {
        strategy,
        trajectories,
    };
    obj.check_shapes()?;
    let all: Vec<usize> = (0..trajectories.len()).collect();
    let batch = if cfg.batch_size == 0 || cfg.optimizer == OptimizerKind::Lbfgs {
        all.len()
    } else {
        cfg.batch_size.min(all.len())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = strategy.model.to_vec();
    let mut cur = obj.evaluate(&theta, &all).map_err(lift(0))?;
    let mut clipped = cur.clipped;

    let mut curve = vec![cur.loss];
    let mut best = (cur.loss, theta.clone(), 0usize);
    let mut since_improvement = 0;
    let mut stopped_early = false;
    let mut adam = Adam::new(theta.len(), cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut memory = LbfgsMemory::new(cfg.lbfgs_memory);
    let mut order = all.clone();

    for epoch in 1..=cfg.epochs {
        match cfg.optimizer {
            OptimizerKind::Lbfgs => {
                match lbfgs_iteration(&obj, &all, &mut theta, &cur, &mut memory, cfg, epoch)? {
                    Some(next) => {
                        clipped += next.clipped;
                        cur = next;
                    }
                    None => {
                        stopped_early = true;
                        break;
                    }
                }
            }
            OptimizerKind::Sgd | OptimizerKind::Adam => {
                if batch == all.len() {
                    apply(cfg, &mut adam, &mut theta, &cur.grad);
                } else {
                    order.shuffle(&mut rng);
                    for chunk in order.chunks(batch) {
                        let mut idx = chunk.to_vec();
                        idx.sort_unstable();
                        let e = obj.evaluate(&theta, &idx).map_err(lift(epoch))?;
                        clipped += e.clipped;
                        apply(cfg, &mut adam, &mut theta, &e.grad);
                    }
                }
                cur = obj.evaluate(&theta, &all).map_err(lift(epoch))?;
                clipped += cur.clipped;
            }
        }
        if !cur.loss.is_finite() {
            return Err(IciError::NonFiniteLoss {
                epoch,
                trajectory: 0,
            });
        }
        curve.push(cur.loss);
        if cur.loss < best.0 - cfg.min_delta {
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        if cur.loss < best.0 {
            best = (cur.loss, theta.clone(), epoch);
        }
        if since_improvement >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome {
        params: strategy.model.with_vec(&best.1),
        loss_curve: curve,
        best_epoch: best.2,
        best_loss: best.0,
        stopped_early,
        clipped_forward_passes: clipped,
    })
}

fn apply(cfg: &TrainConfig, adam: &mut Adam, theta: &mut [f64], grad: &[f64]) {
    match cfg.optimizer {
        OptimizerKind::Sgd => {
            for (t, g) in theta.iter_mut().zip(grad) {
                *t -= cfg.learning_rate * g;
            }
        }
        _ => adam.step(theta, grad, cfg.learning_rate),
    }
}

/// One quasi-Newton step. Returns `None` when no decrease can be found.
fn lbfgs_iteration(
    obj: &Objective<'_>,
    all: &[usize],
    theta: &mut Vec<f64>,
    cur: &Evaluation,
    memory: &mut LbfgsMemory,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<Option<Evaluation>> {
    const ARMIJO: f64 = 1e-4;
    for attempt in 0..2 {
        let mut dir = memory.direction(&cur.grad);
        let mut slope = dot(&dir, &cur.grad);
        if !(slope < 0.0) || attempt == 1 {
            memory.clear();
            dir = cur.grad.iter().map(|g| -g).collect();
            slope = -dot(&cur.grad, &cur.grad);
        }
        if slope == 0.0 {
            return Ok(None);
        }
        let mut step = if memory.is_empty() {
            cfg.learning_rate / dot(&dir, &dir).sqrt().max(1e-300)
        } else {
            1.0
        };
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            match obj.evaluate(&trial, all) {
                Ok(e) if e.loss.is_finite() && e.loss <= cur.loss + ARMIJO * step * slope => {
                    let s: Vec<f64> = trial.iter().zip(theta.iter()).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = e.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
                    memory.push(s, y);
                    *theta = trial;
                    return Ok(Some(e));
                }
                Ok(_) | Err(EvalFailure::NonFinite { .. }) => step *= 0.5,
                Err(f) => return Err(lift(epoch)(f)),
            }
        }
    }
    Ok(None)
}

/// Largest relative deviation between the analytic gradient and central
/// differences of the cost, over all parameters.
pub fn grad_check(
    strategy: &StrategySpec,
    trajectories: &[Trajectory],
    fd_step: f64,
) -> Result<f64> {
    let obj = Objective {
        strategy,
        trajectories,
    };
    obj.check_shapes()?;
    let all: Vec<usize> = (0..trajectories.len()).collect();
    let theta = strategy.model.to_vec();
    let analytic = obj.evaluate(&theta, &all).map_err(lift(0))?;
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let mut plus = theta.clone();
        plus[k] += fd_step;
        let mut minus = theta.clone();
        minus[k] -= fd_step;
        let lp = obj.loss(&plus, &all).map_err(lift(0))?;
        let lm = obj.loss(&minus, &all).map_err(lift(0))?;
        let fd = (lp - lm) / (2.0 * fd_step);
        let a = analytic.grad[k];
        let denom = a.abs().max(fd.abs()).max(1e-6);
        worst = worst.max((a - fd).abs() / denom);
    }
    Ok(worst)
}
