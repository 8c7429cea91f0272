//! Property suites behind `ici verify`. Each suite draws its own random
//! instances from a seed and reports, per property, how many samples were
//! checked, the worst observed value, the limit it is held to and the margin.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{IciError, Result};
use crate::eval::{consistency_sweep, NoiseKind, SweepOptions};
use crate::ici::{
    closed_loop_run, collect_dataset, construct_true_q, open_loop_run, ClosedLoopSystem, IciModel,
};
use crate::linalg::Mat;
use crate::plants::{
    build_benchmark, BenchmarkId, BenchmarkOptions, ControllerSpec, NoiseSpec, ScalarUnstablePlant,
};
use crate::seqops::{feedback_inverse, run_from_reset, LinearStateSpace, OperatorHandle, Sequence};
use crate::stable_family::{FamilyDims, StableOperator, StableOperatorParams};
use crate::training::{grad_check, OptimizerKind, StrategyKind, StrategySpec, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Theorem1,
    Corollary1,
    Gradients,
    Consistency,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Theorem1,
        Suite::Corollary1,
        Suite::Gradients,
        Suite::Consistency,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::Corollary1 => "corollary1",
            Suite::Gradients => "gradients",
            Suite::Consistency => "consistency",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = IciError;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| IciError::Config(format!("unknown suite {s:?}")))
    }
}

/// One checked property. `worst` is the largest observed value of the
/// checked quantity; the property holds when `worst ≤ limit` (or `<` for
/// strict properties), and `margin = limit − worst`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub samples: usize,
    pub worst: f64,
    pub limit: f64,
    pub margin: f64,
    pub pass: bool,
    pub seconds: f64,
}

impl PropertyResult {
    fn at_most(name: &str, samples: usize, worst: f64, limit: f64, started: Instant) -> Self {
        PropertyResult {
            name: name.into(),
            samples,
            worst,
            limit,
            margin: limit - worst,
            pass: worst <= limit,
            seconds: started.elapsed().as_secs_f64(),
        }
    }

    fn below(name: &str, samples: usize, worst: f64, limit: f64, started: Instant) -> Self {
        PropertyResult {
            pass: worst < limit,
            ..Self::at_most(name, samples, worst, limit, started)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub pass: bool,
    pub properties: Vec<PropertyResult>,
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let properties = match suite {
        Suite::Theorem1 => theorem1(seed)?,
        Suite::Corollary1 => vec![corollary1(seed)?],
        Suite::Gradients => gradients(seed)?,
        Suite::Consistency => consistency(seed)?,
    };
    Ok(SuiteReport {
        suite,
        seed,
        pass: properties.iter().all(|p| p.pass),
        properties,
    })
}

fn randn_seq(rng: &mut ChaCha8Rng, horizon: usize, dim: usize) -> Sequence {
    let data = (0..horizon * dim)
        .map(|_| StandardNormal.sample(&mut *rng))
        .collect();
    Sequence::from_flat(dim, data).expect("dim > 0")
}

fn unit(x: Sequence) -> Sequence {
    let n = x.lp_norm(2);
    x.scale(1.0 / n)
}

fn randn_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Mat {
    let data = (0..rows * cols)
        .map(|_| std * Distribution::<f64>::sample(&StandardNormal, &mut *rng))
        .collect();
    Mat::from_rows(rows, cols, data)
}

fn random_stable_plant(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> LinearStateSpace {
    let a = randn_mat(rng, n, n, 1.0);
    let scale = rng.random_range(0.2..1.0) * radius / a.spectral_radius().max(1e-12);
    LinearStateSpace::new(
        a.scale(scale),
        randn_mat(rng, n, 1, 1.0),
        randn_mat(rng, 1, n, 1.0),
        None,
    )
}

/// Random causal linear controller, kept only if the loop's state matrix
/// has spectral radius below 0.95.
fn random_stabilizing_controller(rng: &mut ChaCha8Rng, plant: &LinearStateSpace) -> ControllerSpec {
    let n = plant.order();
    loop {
        let m = rng.random_range(0..=2);
        let ak = if m == 0 {
            Mat::zeros(0, 0)
        } else {
            let a = randn_mat(rng, m, m, 1.0);
            a.scale(0.7 / a.spectral_radius().max(1e-12))
        };
        let (bk, ck, dk) = (
            randn_mat(rng, m, 1, 0.5),
            randn_mat(rng, 1, m, 0.5),
            randn_mat(rng, 1, 1, 0.5),
        );
        let bdc = plant.b.matmul(&dk).matmul(&plant.c);
        let bck = plant.b.matmul(&ck);
        let bkc = bk.matmul(&plant.c);
        let mut acl = Mat::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                acl.set(i, j, plant.a.get(i, j) + bdc.get(i, j));
            }
            for j in 0..m {
                acl.set(i, n + j, bck.get(i, j));
            }
        }
        for i in 0..m {
            for j in 0..n {
                acl.set(n + i, j, bkc.get(i, j));
            }
            for j in 0..m {
                acl.set(n + i, n + j, ak.get(i, j));
            }
        }
        if acl.spectral_radius() < 0.95 {
            return ControllerSpec::LinearSs {
                a: ak,
                b: bk,
                c: ck,
                d: dk,
            };
        }
    }
}

/// `‖ICI(Q̃, K)(û) − G(û)‖₂` and `‖G(û)‖₂`.
fn reconstruction_error(
    plant: OperatorHandle,
    k: OperatorHandle,
    u: &Sequence,
) -> Result<(f64, f64)> {
    let q = construct_true_q(plant.clone(), k.clone())?;
    let mut g_hat = IciModel::new(q, k)?;
    let mut plant = plant;
    let a = run_from_reset(&mut g_hat, u)?;
    let b = open_loop_run(plant.as_mut(), u)?;
    Ok((a.sub(&b)?.lp_norm(2), b.lp_norm(2)))
}

fn theorem1(seed: u64) -> Result<Vec<PropertyResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // bounded loop signals for every θ
    let started = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut samples = 0;
    let mut finite = true;
    for _ in 0..50 {
        let dims = FamilyDims {
            in_dim: 2,
            out_dim: 2,
            n_h: 8,
            n_linear: rng.random_range(0..=8),
            alpha: 0.95,
        };
        let mut p = StableOperatorParams::random(dims, &mut rng);
        p.b = p.b.scale(10.0);
        p.c = p.c.scale(10.0);
        let k = ControllerSpec::Proportional2d {
            kappa1: rng.random_range(0.1..2.0),
            kappa2: rng.random_range(0.1..2.0),
            target: [0.0, 0.0],
        };
        let gamma = k.certified_ifg().expect("proportional gains are certified");
        let mut model = IciModel::new(Box::new(StableOperator::new(p)), k.boxed())?;
        let mut outer = k.operator();
        for _ in 0..100 {
            let r = unit(randn_seq(&mut rng, 100, 2));
            let v = unit(randn_seq(&mut rng, 100, 2));
            match model.closed_loop_run(&mut outer, &r, &v) {
                Ok(tr) => {
                    finite &= tr.u.all_finite() && tr.y.all_finite() && tr.omega.all_finite();
                    let bound = r.lp_norm(2) + gamma * v.lp_norm(2);
                    worst = worst.max(tr.omega.lp_norm(2) - bound);
                }
                Err(_) => finite = false,
            }
            samples += 1;
        }
    }
    let mut bound = PropertyResult::at_most("t1_omega_bound", samples, worst, 1e-9, started);
    bound.pass &= finite;

    // T.2 on random linear loops
    let started = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let order = rng.random_range(1..=3);
        let plant = random_stable_plant(&mut rng, order, 0.9);
        let k = random_stabilizing_controller(&mut rng, &plant);
        let u = randn_seq(&mut rng, 100, 1);
        let (err, norm) = reconstruction_error(Box::new(plant), k.boxed(), &u)?;
        worst = worst.max(err / norm.max(1.0));
    }
    let linear = PropertyResult::at_most("t2_linear_round_trip", 50, worst, 1e-6, started);

    // T.2 on the scalar benchmark, û taken from bounded closed-loop runs
    let started = Instant::now();
    let noise = NoiseSpec::TruncatedGaussian {
        std: 0.1,
        lower: -0.25,
        upper: 0.25,
    };
    let mut cl = ClosedLoopSystem::new(
        Box::new(ScalarUnstablePlant::default()),
        ControllerSpec::ScalarPoly.boxed(),
        noise.clone(),
    )?;
    let mut worst = 0.0f64;
    let n_scalar = 20;
    for _ in 0..n_scalar {
        let r = randn_seq(&mut rng, 100, 1).scale(0.5);
        let v = noise.sample(100, 1, &mut rng);
        let (u, _) = closed_loop_run(&mut cl, &r, &v)?;
        let (err, norm) = reconstruction_error(
            Box::new(ScalarUnstablePlant::default()),
            ControllerSpec::ScalarPoly.boxed(),
            &u,
        )?;
        worst = worst.max(err / norm.max(1.0));
    }
    let scalar = PropertyResult::at_most("t2_scalar_round_trip", n_scalar, worst, 1e-6, started);
    Ok(vec![bound, linear, scalar])
}

/// `Υ°` drawn from the stable family or as a strictly proper linear system,
/// with incremental gain below one so `(I + Υ°)⁻¹` stays bounded and the
/// round trip is not swamped by rounding.
fn random_upsilon(rng: &mut ChaCha8Rng, i: usize) -> OperatorHandle {
    let dim = rng.random_range(1..=3);
    let gain = rng.random_range(0.1..0.9);
    if i % 2 == 0 {
        let dims = FamilyDims {
            in_dim: dim,
            out_dim: dim,
            n_h: rng.random_range(1..=8),
            n_linear: 0,
            alpha: rng.random_range(0.5..0.99),
        };
        let mut p = StableOperatorParams::random(dims, rng);
        p.n_linear = rng.random_range(0..=dims.n_h);
        p.a_raw = p.a_raw.scale(2.0);
        for v in p.bias_h.iter_mut().chain(p.bias_y.iter_mut()) {
            *v = StandardNormal.sample(&mut *rng);
        }
        p.c = p.c.scale(gain / p.incremental_gain_bound());
        Box::new(StableOperator::new(p))
    } else {
        let n = rng.random_range(1..=4);
        let a = randn_mat(rng, n, n, 1.0);
        let norm = rng.random_range(0.1..0.9);
        let a = a.scale(norm / a.spectral_norm_svd().max(1e-12));
        let b = randn_mat(rng, n, dim, 1.0);
        let c = randn_mat(rng, dim, n, 1.0);
        let k = gain * (1.0 - norm) / (b.spectral_norm_svd() * c.spectral_norm_svd()).max(1e-12);
        Box::new(LinearStateSpace::new(a, b, c.scale(k), None))
    }
}

fn corollary1(seed: u64) -> Result<PropertyResult> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let upsilon_o = random_upsilon(&mut rng, i);
        let dim = upsilon_o.in_dim();
        let a = randn_seq(&mut rng, 100, dim);
        let mut inv = feedback_inverse(upsilon_o.clone())?;
        let b = run_from_reset(inv.as_mut(), &a)?;
        let mut fwd = upsilon_o;
        let back = b.add(&run_from_reset(fwd.as_mut(), &b)?)?;
        worst = worst.max(back.sub(&a)?.lp_norm(2) / a.lp_norm(2).max(1.0));
    }
    Ok(PropertyResult::at_most(
        "feedback_inverse_round_trip",
        100,
        worst,
        1e-9,
        started,
    ))
}

fn gradients(seed: u64) -> Result<Vec<PropertyResult>> {
    let robot = build_benchmark(BenchmarkId::Robot, &BenchmarkOptions::default())?;
    let robot_data = collect_dataset(
        &ClosedLoopSystem::from_benchmark(&robot)?,
        2,
        20,
        10.0,
        seed,
    )?;
    let scalar = build_benchmark(BenchmarkId::ScalarUnstable, &BenchmarkOptions::default())?;
    let scalar_data = collect_dataset(
        &ClosedLoopSystem::from_benchmark(&scalar)?,
        2,
        20,
        0.5,
        seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let cases = [
        (
            "S1_direct_id",
            StrategyKind::S1DirectId,
            &robot,
            &robot_data,
        ),
        ("S2_dir_ici", StrategyKind::S2DirIci, &robot, &robot_data),
        (
            "S3_indir_ici",
            StrategyKind::S3IndirIci,
            &robot,
            &robot_data,
        ),
        (
            "S2_dir_ici_poly",
            StrategyKind::S2DirIci,
            &scalar,
            &scalar_data,
        ),
    ];
    for (name, kind, bench, data) in cases {
        let started = Instant::now();
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let dims = FamilyDims {
                in_dim: bench.u_dim(),
                out_dim: bench.y_dim(),
                n_h: 6,
                n_linear: rng.random_range(0..=6),
                alpha: 0.95,
            };
            let mut p = StableOperatorParams::random(dims, &mut rng);
            p.a_raw = p.a_raw.scale(2.0);
            let spec = StrategySpec::new(kind, p, bench.controller.clone());
            worst = worst.max(grad_check(&spec, &data.trajectories, 1e-6)?);
        }
        out.push(PropertyResult::below(
            &format!("grad_{name}"),
            5,
            worst,
            1e-4,
            started,
        ));
    }
    Ok(out)
}

/// Training settings used by the linear consistency sweep.
pub fn consistency_train_config() -> TrainConfig {
    TrainConfig {
        epochs: 300,
        optimizer: OptimizerKind::Lbfgs,
        learning_rate: 1e-2,
        patience: 20,
        min_delta: 1e-12,
        ..Default::default()
    }
}

pub const CONSISTENCY_SIZES: [(usize, usize); 3] = [(10, 100), (40, 100), (160, 100)];

fn consistency(seed: u64) -> Result<Vec<PropertyResult>> {
    let started = Instant::now();
    let seeds: Vec<u64> = (0..10).map(|i| seed.wrapping_add(i)).collect();
    let opts = SweepOptions {
        noise: vec![NoiseKind::White, NoiseKind::Colored],
        sizes: CONSISTENCY_SIZES.to_vec(),
        strategies: vec![StrategyKind::S1DirectId, StrategyKind::S3IndirIci],
        seeds: seeds.clone(),
        sigma_r: 1.0,
        train: consistency_train_config(),
    };
    let table = consistency_sweep(&opts)?;
    let mean = |noise, kind, (n, t): (usize, usize)| {
        table.mean_error(noise, kind, n, t).unwrap_or(f64::INFINITY)
    };
    let s3_white: Vec<f64> = CONSISTENCY_SIZES
        .iter()
        .map(|&s| mean(NoiseKind::White, StrategyKind::S3IndirIci, s))
        .collect();
    let largest = CONSISTENCY_SIZES[2];
    let steps = s3_white
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let cells = seeds.len() * CONSISTENCY_SIZES.len();
    let s1_col = mean(NoiseKind::Colored, StrategyKind::S1DirectId, largest);
    let s3_col = mean(NoiseKind::Colored, StrategyKind::S3IndirIci, largest);
    Ok(vec![
        PropertyResult::below(
            "s3_white_error_strictly_decreasing",
            cells,
            steps,
            0.0,
            started,
        ),
        PropertyResult::below(
            "s3_white_final_relative_error",
            seeds.len(),
            s3_white[2] / table.true_q_norm,
            0.05,
            started,
        ),
        // S1's colored-noise error must exceed 3× S3's: 3·S3 / S1 < 1
        PropertyResult::below(
            "s1_colored_bias_floor",
            seeds.len(),
            3.0 * s3_col / s1_col,
            1.0,
            started,
        ),
    ])
}
