//! Benchmark plants, controllers and disturbance generators, addressable by
//! string identifiers.

mod controller;
mod linear_bench;
mod noise;
mod robot;
mod scalar;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use controller::{ControllerOp, ControllerSpec};
pub use linear_bench::{linear_benchmark, LinearBenchmark, LINEAR_BENCH_ALPHA};
pub use noise::NoiseSpec;
pub use robot::{drag, robot_step, PointMassRobot, RobotParams};
pub use scalar::{scalar_plant_step, ScalarUnstablePlant};

use crate::error::{IciError, Result};
use crate::seqops::OperatorHandle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkId {
    ScalarUnstable,
    Robot,
    LinearBench,
}

impl BenchmarkId {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkId::ScalarUnstable => "scalar_unstable",
            BenchmarkId::Robot => "robot",
            BenchmarkId::LinearBench => "linear_bench",
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkId {
    type Err = IciError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar_unstable" => Ok(BenchmarkId::ScalarUnstable),
            "robot" => Ok(BenchmarkId::Robot),
            "linear_bench" => Ok(BenchmarkId::LinearBench),
            other => Err(IciError::Config(format!("unknown benchmark {other:?}"))),
        }
    }
}

/// Knobs a config may override on top of the registry defaults.
#[derive(Debug, Clone, Default)]
pub struct BenchmarkOptions {
    pub noise: Option<NoiseSpec>,
    pub robot: Option<RobotParams>,
    pub kappa: Option<[f64; 2]>,
}

/// A true plant with its stabilizing controller and disturbance model.
#[derive(Clone)]
pub struct Benchmark {
    pub id: BenchmarkId,
    pub plant: OperatorHandle,
    pub controller: ControllerSpec,
    pub noise: NoiseSpec,
}

impl Benchmark {
    pub fn u_dim(&self) -> usize {
        self.plant.in_dim()
    }

    pub fn y_dim(&self) -> usize {
        self.plant.out_dim()
    }
}

pub fn default_noise(id: BenchmarkId) -> NoiseSpec {
    match id {
        BenchmarkId::ScalarUnstable => NoiseSpec::TruncatedGaussian {
            std: 0.1,
            lower: -0.25,
            upper: 0.25,
        },
        BenchmarkId::Robot | BenchmarkId::LinearBench => NoiseSpec::Gaussian { std: 0.1 },
    }
}

pub fn build_benchmark(id: BenchmarkId, opts: &BenchmarkOptions) -> Result<Benchmark> {
    let noise = opts.noise.clone().unwrap_or_else(|| default_noise(id));
    noise.validate()?;
    let (plant, controller): (OperatorHandle, ControllerSpec) = match id {
        BenchmarkId::ScalarUnstable => (
            Box::new(ScalarUnstablePlant::default()),
            ControllerSpec::ScalarPoly,
        ),
        BenchmarkId::Robot => {
            let params = opts.robot.unwrap_or_default();
            params.validate()?;
            let [kappa1, kappa2] = opts.kappa.unwrap_or([1.0, 1.0]);
            let k = ControllerSpec::Proportional2d {
                kappa1,
                kappa2,
                target: [0.0, 0.0],
            };
            k.validate()?;
            (Box::new(PointMassRobot::new(params)), k)
        }
        BenchmarkId::LinearBench => {
            let lb = linear_benchmark();
            (Box::new(lb.plant), lb.controller)
        }
    };
    Ok(Benchmark {
        id,
        plant,
        controller,
        noise,
    })
}
