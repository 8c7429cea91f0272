#![allow(dead_code)]

use ici::linalg::Mat;
use ici::plants::ControllerSpec;
use ici::seqops::{LinearStateSpace, Sequence};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn randn(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn randn_seq(rng: &mut ChaCha8Rng, horizon: usize, dim: usize, std: f64) -> Sequence {
    Sequence::from_flat(dim, (0..horizon * dim).map(|_| std * randn(rng)).collect()).unwrap()
}

/// Scales a sequence to unit ℓ₂ norm.
pub fn unit_norm(x: Sequence) -> Sequence {
    let n = x.lp_norm(2);
    x.scale(1.0 / n)
}

pub fn randn_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Mat {
    Mat::from_rows(
        rows,
        cols,
        (0..rows * cols).map(|_| std * randn(rng)).collect(),
    )
}

/// Random strictly causal LTI plant with spectral radius at most `radius`.
pub fn random_stable_plant(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> LinearStateSpace {
    let a = randn_mat(rng, n, n, 1.0);
    let rho = a.spectral_radius().max(1e-12);
    let scale = rng.random_range(0.2..1.0) * radius / rho;
    LinearStateSpace::new(
        a.scale(scale),
        randn_mat(rng, n, 1, 1.0),
        randn_mat(rng, 1, n, 1.0),
        None,
    )
}

/// Random causal SISO linear controller whose loop with `plant` is
/// asymptotically stable (closed-loop spectral radius below 0.95).
pub fn random_stabilizing_controller(
    rng: &mut ChaCha8Rng,
    plant: &LinearStateSpace,
) -> ControllerSpec {
    let n = plant.order();
    loop {
        let m = rng.random_range(0..=2);
        let ak = if m == 0 {
            Mat::zeros(0, 0)
        } else {
            let a = randn_mat(rng, m, m, 1.0);
            let rho = a.spectral_radius().max(1e-12);
            a.scale(0.7 / rho)
        };
        let bk = randn_mat(rng, m, 1, 0.5);
        let ck = randn_mat(rng, 1, m, 0.5);
        let dk = randn_mat(rng, 1, 1, 0.5);
        let mut acl = Mat::zeros(n + m, n + m);
        let bdc = plant.b.matmul(&dk).matmul(&plant.c);
        let bck = plant.b.matmul(&ck);
        let bkc = bk.matmul(&plant.c);
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

pub fn max_abs_diff(a: &Sequence, b: &Sequence) -> f64 {
    a.as_flat()
        .iter()
        .zip(b.as_flat())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
