//! Experiment configuration: one flat JSON object per experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{IciError, Result};
use crate::eval::EvalOptions;
use crate::plants::{
    build_benchmark, Benchmark, BenchmarkId, BenchmarkOptions, NoiseSpec, RobotParams,
};
use crate::stable_family::FamilyDims;
use crate::training::{OptimizerKind, StrategyKind, TrainConfig};

/// Training datasets of different seeds are spaced this far apart so their
/// per-trajectory seeds never overlap.
pub const DATASET_SEED_STRIDE: u64 = 1 << 20;

/// A run is a pure function of this struct. Keys carry their units where
/// they have one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkId,
    pub strategy: StrategyKind,
    pub sigma_r: f64,
    pub n_trajectories: usize,
    pub horizon: usize,
    /// Disturbance model; `null` selects the benchmark default.
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub robot: Option<RobotParams>,
    #[serde(default)]
    pub kappa: Option<[f64; 2]>,

    pub n_h: usize,
    pub n_linear: usize,
    pub alpha: f64,

    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub batch_size: usize,
    #[serde(default = "defaults::patience")]
    pub patience: usize,
    #[serde(default = "defaults::min_delta")]
    pub min_delta: f64,
    #[serde(default = "defaults::lbfgs_memory")]
    pub lbfgs_memory: usize,
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,

    pub seeds: Vec<u64>,
    #[serde(default = "defaults::n_test")]
    pub n_test: usize,
    /// Defaults to `horizon`.
    #[serde(default)]
    pub test_horizon: Option<usize>,
    /// Defaults to `sigma_r`.
    #[serde(default)]
    pub test_sigma_r: Option<f64>,

    /// Sweep axes; each defaults to the single value above.
    #[serde(default)]
    pub sweep_strategies: Option<Vec<StrategyKind>>,
    #[serde(default)]
    pub sweep_sigmas_r: Option<Vec<f64>>,

    /// When set, `train` refuses datasets with a different hash.
    #[serde(default)]
    pub expected_dataset_hash: Option<String>,
    pub output_dir: PathBuf,
}

mod defaults {
    use crate::training::TrainConfig;

    pub fn patience() -> usize {
        TrainConfig::default().patience
    }
    pub fn min_delta() -> f64 {
        TrainConfig::default().min_delta
    }
    pub fn lbfgs_memory() -> usize {
        TrainConfig::default().lbfgs_memory
    }
    pub fn beta1() -> f64 {
        TrainConfig::default().beta1
    }
    pub fn beta2() -> f64 {
        TrainConfig::default().beta2
    }
    pub fn epsilon() -> f64 {
        TrainConfig::default().epsilon
    }
    pub fn n_test() -> usize {
        100
    }
}

fn positive_finite(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| IciError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IciError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IciError::Config(m));
        if self.n_trajectories == 0 || self.horizon == 0 {
            return bad("n_trajectories and horizon must be at least 1".into());
        }
        if self.n_test == 0 || self.test_horizon == Some(0) {
            return bad("n_test and test_horizon must be at least 1".into());
        }
        let sigmas = self.sigmas();
        if let Some(s) = sigmas
            .iter()
            .chain(self.test_sigma_r.iter())
            .find(|s| !(**s >= 0.0 && s.is_finite()))
        {
            return bad(format!("sigma_r {s} must be finite and nonnegative"));
        }
        if self.n_h == 0 || self.n_linear > self.n_h {
            return bad("need n_h ≥ 1 and n_linear ≤ n_h".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} must lie in (0, 1)", self.alpha));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.sweep_strategies.as_ref().is_some_and(|v| v.is_empty())
            || self.sweep_sigmas_r.as_ref().is_some_and(|v| v.is_empty())
        {
            return bad("sweep axes must not be empty".into());
        }
        if !positive_finite(self.learning_rate) {
            return bad("learning_rate must be positive".into());
        }
        self.train_config(0).validate()?;
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        if let Some(r) = &self.robot {
            r.validate()?;
        }
        if let Some(k) = self.kappa {
            if !k.iter().all(|v| positive_finite(*v)) {
                return bad("kappa gains must be positive".into());
            }
        }
        if (self.robot.is_some() || self.kappa.is_some()) && self.benchmark != BenchmarkId::Robot {
            return bad("robot and kappa apply only to the robot benchmark".into());
        }
        Ok(())
    }

    pub fn benchmark_options(&self) -> BenchmarkOptions {
        BenchmarkOptions {
            noise: self.noise.clone(),
            robot: self.robot,
            kappa: self.kappa,
        }
    }

    pub fn build_benchmark(&self) -> Result<Benchmark> {
        build_benchmark(self.benchmark, &self.benchmark_options())
    }

    pub fn dims(&self, bench: &Benchmark) -> FamilyDims {
        FamilyDims {
            in_dim: bench.u_dim(),
            out_dim: bench.y_dim(),
            n_h: self.n_h,
            n_linear: self.n_linear,
            alpha: self.alpha,
        }
    }

    /// Training settings; the seed drives minibatch shuffling.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            lbfgs_memory: self.lbfgs_memory,
            batch_size: self.batch_size,
            seed,
            patience: self.patience,
            min_delta: self.min_delta,
        }
    }

    pub fn eval_options(&self, seed: u64) -> EvalOptions {
        EvalOptions {
            n_test: self.n_test,
            horizon: self.test_horizon.unwrap_or(self.horizon),
            sigma_r: self.test_sigma_r.unwrap_or(self.sigma_r),
            seed,
        }
    }

    pub fn strategies(&self) -> Vec<StrategyKind> {
        self.sweep_strategies
            .clone()
            .unwrap_or_else(|| vec![self.strategy])
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.sweep_sigmas_r
            .clone()
            .unwrap_or_else(|| vec![self.sigma_r])
    }

    /// The same config pinned to one strategy and excitation level.
    pub fn cell(&self, strategy: StrategyKind, sigma_r: f64) -> ExperimentConfig {
        ExperimentConfig {
            strategy,
            sigma_r,
            sweep_strategies: None,
            sweep_sigmas_r: None,
            ..self.clone()
        }
    }
}

pub fn dataset_base_seed(seed: u64) -> u64 {
    seed.wrapping_mul(DATASET_SEED_STRIDE)
}
