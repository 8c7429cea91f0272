//! Parameter error of each strategy on the linear benchmark as the sample
//! size grows, measured on impulse responses (realizations are not unique).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ici::{collect_dataset, construct_true_q, ClosedLoopSystem};
use crate::linalg::norm2;
use crate::plants::{
    build_benchmark, BenchmarkId, BenchmarkOptions, NoiseSpec, LINEAR_BENCH_ALPHA,
};
use crate::seqops::{run_from_reset, CausalOperator, OperatorHandle, Sequence};
use crate::stable_family::{FamilyDims, StableOperator, StableOperatorParams};
use crate::training::{init_model, train, StrategyKind, StrategySpec, TrainConfig};

/// Lags compared by the parameter-error metric.
pub const IMPULSE_LAGS: usize = 20;

/// Response to a unit impulse on input 0 minus the zero-input response,
/// flattened `lags × d_y`.
pub fn impulse_response(op: &mut dyn CausalOperator, lags: usize) -> Result<Vec<f64>> {
    let zero = Sequence::zeros(lags, op.in_dim());
    let mut e = zero.clone();
    if lags > 0 {
        e.step_mut(0)[0] = 1.0;
    }
    let y = run_from_reset(op, &e)?;
    let y0 = run_from_reset(op, &zero)?;
    Ok(y.sub(&y0)?.into_flat())
}

pub fn params_impulse_response(p: &StableOperatorParams, lags: usize) -> Result<Vec<f64>> {
    impulse_response(&mut StableOperator::new(p.clone()), lags)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Zero,
    White,
    Colored,
}

impl NoiseKind {
    pub fn spec(&self) -> NoiseSpec {
        match self {
            NoiseKind::Zero => NoiseSpec::Zero,
            NoiseKind::White => NoiseSpec::Gaussian { std: 0.1 },
            NoiseKind::Colored => NoiseSpec::arma11(0.9, 0.5, 0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub noise: Vec<NoiseKind>,
    pub sizes: Vec<(usize, usize)>,
    pub strategies: Vec<StrategyKind>,
    pub seeds: Vec<u64>,
    pub sigma_r: f64,
    pub train: TrainConfig,
}

/// One trained model; `error` is `None` when training failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub noise: NoiseKind,
    pub strategy: StrategyKind,
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub error: Option<f64>,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyTable {
    pub true_q_norm: f64,
    pub rows: Vec<ConsistencyRow>,
}

impl ConsistencyTable {
    /// Mean error over seeds; `None` if any cell failed.
    pub fn mean_error(
        &self,
        noise: NoiseKind,
        strategy: StrategyKind,
        n: usize,
        t: usize,
    ) -> Option<f64> {
        let cells: Vec<Option<f64>> = self
            .rows
            .iter()
            .filter(|r| r.noise == noise && r.strategy == strategy && r.n == n && r.t == t)
            .map(|r| r.error)
            .collect();
        if cells.is_empty() {
            return None;
        }
        let v: Option<Vec<f64>> = cells.into_iter().collect();
        v.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Internal operator implied by a trained model: `Q̂` itself for the ICI
/// strategies, `Ĝ(I − KĜ)⁻¹` for direct identification.
pub fn implied_q(
    kind: StrategyKind,
    params: &StableOperatorParams,
    k: OperatorHandle,
) -> Result<OperatorHandle> {
    let op: OperatorHandle = Box::new(StableOperator::new(params.clone()));
    if kind.uses_ici() {
        Ok(op)
    } else {
        construct_true_q(op, k)
    }
}

pub fn consistency_sweep(opts: &SweepOptions) -> Result<ConsistencyTable> {
    let lb = crate::plants::linear_benchmark();
    let true_ir = params_impulse_response(&lb.true_q, IMPULSE_LAGS)?;
    let dims = FamilyDims {
        in_dim: 1,
        out_dim: 1,
        n_h: 2,
        n_linear: 2,
        alpha: LINEAR_BENCH_ALPHA,
    };
    let mut cells = Vec::new();
    for (ni, &noise) in opts.noise.iter().enumerate() {
        for (si, &(n, t)) in opts.sizes.iter().enumerate() {
            for &seed in &opts.seeds {
                cells.push((ni, noise, si, n, t, seed));
            }
        }
    }
    let rows: Vec<Vec<ConsistencyRow>> = cells
        .par_iter()
        .map(
            |&(ni, noise, si, n, t, seed)| -> Result<Vec<ConsistencyRow>> {
                let bench = build_benchmark(
                    BenchmarkId::LinearBench,
                    &BenchmarkOptions {
                        noise: Some(noise.spec()),
                        ..Default::default()
                    },
                )?;
                let cl = ClosedLoopSystem::from_benchmark(&bench)?;
                let base = seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add((ni as u64) << 32)
                    .wrapping_add((si as u64) << 20);
                let data = collect_dataset(&cl, n, t, opts.sigma_r, base)?;
                let mut out = Vec::new();
                for &kind in &opts.strategies {
                    let spec =
                        StrategySpec::new(kind, init_model(dims, seed), bench.controller.clone());
                    let cfg = TrainConfig {
                        seed,
                        ..opts.train.clone()
                    };
                    let error = train(&spec, &data, &cfg).ok().and_then(|o| {
                        let mut q = implied_q(kind, &o.params, bench.controller.boxed()).ok()?;
                        let ir = impulse_response(q.as_mut(), IMPULSE_LAGS).ok()?;
                        let diff: Vec<f64> = ir.iter().zip(&true_ir).map(|(a, b)| a - b).collect();
                        Some(norm2(&diff))
                    });
                    out.push(ConsistencyRow {
                        noise,
                        strategy: kind,
                        n,
                        t,
                        seed,
                        error,
                        relative_error: error.map(|e| e / norm2(&true_ir)),
                    });
                }
                Ok(out)
            },
        )
        .collect::<Result<_>>()?;
    Ok(ConsistencyTable {
        true_q_norm: norm2(&true_ir),
        rows: rows.into_iter().flatten().collect(),
    })
}
