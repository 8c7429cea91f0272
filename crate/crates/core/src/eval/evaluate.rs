use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::r_squared;
use crate::error::{IciError, Result};
use crate::ici::{open_loop_run, run_loop, sample_disturbance, sample_excitation};
use crate::plants::Benchmark;
use crate::seqops::{OperatorHandle, Sequence};
use crate::training::cost;

/// Offset separating test-set seeds from training seeds.
pub const TEST_SEED_OFFSET: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub n_test: usize,
    pub horizon: usize,
    pub sigma_r: f64,
    /// Test trajectory `i` uses seed `seed + TEST_SEED_OFFSET + i`.
    pub seed: u64,
}

/// Metrics of one model on one test set. `None` marks a metric that is not
/// computable because a run diverged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub ol_mse: Option<f64>,
    pub cl_mse: Option<f64>,
    pub ol_r2: Option<f64>,
    pub cl_r2: Option<f64>,
    pub n_test: usize,
    pub ol_diverged: usize,
    pub cl_diverged: usize,
}

impl SeedMetrics {
    pub fn diverged(&self) -> bool {
        self.ol_diverged + self.cl_diverged > 0
    }
}

/// Per-step mean and 95% band across test trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub mean: Sequence,
    pub lo: Sequence,
    pub hi: Sequence,
}

impl Band {
    pub fn from_runs(runs: &[&Sequence]) -> Option<Band> {
        let first = runs.first()?;
        let (horizon, dim) = (first.horizon(), first.dim());
        let n = runs.len() as f64;
        let mut mean = Sequence::zeros(horizon, dim);
        let mut lo = Sequence::zeros(horizon, dim);
        let mut hi = Sequence::zeros(horizon, dim);
        for k in 0..horizon * dim {
            let m = runs.iter().map(|r| r.as_flat()[k]).sum::<f64>() / n;
            let var = if runs.len() > 1 {
                runs.iter()
                    .map(|r| (r.as_flat()[k] - m).powi(2))
                    .sum::<f64>()
                    / (n - 1.0)
            } else {
                0.0
            };
            let half = 1.96 * var.sqrt();
            mean.as_flat_mut()[k] = m;
            lo.as_flat_mut()[k] = m - half;
            hi.as_flat_mut()[k] = m + half;
        }
        Some(Band { mean, lo, hi })
    }
}

/// Everything an evaluation produces: metrics plus the raw test outputs.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub metrics: SeedMetrics,
    /// `(true, model)` open-loop outputs, absent where a run diverged.
    pub open_loop: Vec<Option<(Sequence, Sequence)>>,
    pub closed_loop: Vec<Option<(Sequence, Sequence)>>,
}

impl Evaluation {
    pub fn ol_bands(&self) -> Option<(Band, Band)> {
        bands(&self.open_loop)
    }

    pub fn cl_bands(&self) -> Option<(Band, Band)> {
        bands(&self.closed_loop)
    }
}

fn bands(runs: &[Option<(Sequence, Sequence)>]) -> Option<(Band, Band)> {
    let ok: Vec<&(Sequence, Sequence)> = runs.iter().flatten().collect();
    let truth: Vec<&Sequence> = ok.iter().map(|p| &p.0).collect();
    let model: Vec<&Sequence> = ok.iter().map(|p| &p.1).collect();
    Some((Band::from_runs(&truth)?, Band::from_runs(&model)?))
}

struct TestRun {
    ol: Option<(Sequence, Sequence)>,
    cl: Option<(Sequence, Sequence)>,
}

/// Compares `model` (a plant model `Ĝ`) with the benchmark's true plant on a
/// fresh test set, open loop under the excitation `r` and in closed loop
/// with the benchmark controller under identical `(r, v)`.
pub fn evaluate(
    model: &OperatorHandle,
    bench: &Benchmark,
    opts: &EvalOptions,
) -> Result<Evaluation> {
    if opts.n_test == 0 || opts.horizon == 0 {
        return Err(IciError::Config(
            "n_test and horizon must be positive".into(),
        ));
    }
    if model.in_dim() != bench.u_dim() || model.out_dim() != bench.y_dim() {
        return Err(IciError::Config(
            "model does not match the benchmark dimensions".into(),
        ));
    }
    let runs: Vec<TestRun> = (0..opts.n_test as u64)
        .into_par_iter()
        .map(|i| {
            let seed = opts.seed.wrapping_add(TEST_SEED_OFFSET).wrapping_add(i);
            let r = sample_excitation(seed, opts.horizon, bench.u_dim(), opts.sigma_r);
            let v = sample_disturbance(&bench.noise, seed, opts.horizon, bench.y_dim());
            let mut plant = bench.plant.clone();
            let mut g_hat = model.clone();
            let ol = match (
                open_loop_run(plant.as_mut(), &r),
                open_loop_run(g_hat.as_mut(), &r),
            ) {
                (Ok(y), Ok(p)) => Some((y.add(&v).expect("same shape"), p)),
                _ => None,
            };
            let mut k1 = bench.controller.boxed();
            let mut k2 = bench.controller.boxed();
            let cl = match (
                run_loop(plant.as_mut(), k1.as_mut(), &r, &v),
                run_loop(g_hat.as_mut(), k2.as_mut(), &r, &v),
            ) {
                (Ok((_, y)), Ok((_, p))) => Some((y, p)),
                _ => None,
            };
            TestRun { ol, cl }
        })
        .collect();
    let open_loop: Vec<_> = runs.iter().map(|r| r.ol.clone()).collect();
    let closed_loop: Vec<_> = runs.into_iter().map(|r| r.cl).collect();
    let (ol_mse, ol_r2, ol_diverged) = score(&open_loop)?;
    let (cl_mse, cl_r2, cl_diverged) = score(&closed_loop)?;
    Ok(Evaluation {
        metrics: SeedMetrics {
            ol_mse,
            cl_mse,
            ol_r2,
            cl_r2,
            n_test: opts.n_test,
            ol_diverged,
            cl_diverged,
        },
        open_loop,
        closed_loop,
    })
}

fn score(runs: &[Option<(Sequence, Sequence)>]) -> Result<(Option<f64>, Option<f64>, usize)> {
    let diverged = runs.iter().filter(|r| r.is_none()).count();
    if diverged > 0 {
        return Ok((None, None, diverged));
    }
    let meas: Vec<Sequence> = runs.iter().flatten().map(|p| p.0.clone()).collect();
    let pred: Vec<Sequence> = runs.iter().flatten().map(|p| p.1.clone()).collect();
    Ok((Some(cost(&pred, &meas)?), r_squared(&meas, &pred)?, 0))
}
