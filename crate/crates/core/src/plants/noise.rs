use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{IciError, Result};
use crate::seqops::Sequence;

/// Output disturbance `v`, i.i.d. across components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Zero,
    Gaussian {
        std: f64,
    },
    /// `N(0, std²)` conditioned on the open interval `(lower, upper)`,
    /// drawn by rejection.
    TruncatedGaussian {
        std: f64,
        lower: f64,
        upper: f64,
    },
    /// `v = H(e)`: white `e ~ N(0, white_std²)` through
    /// `v_t = Σ ar_i v_{t−i} + e_t + Σ ma_j e_{t−j}`, started `burn_in`
    /// steps early so the emitted window is stationary.
    ColoredArma {
        ar: Vec<f64>,
        ma: Vec<f64>,
        white_std: f64,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
    },
}

fn default_burn_in() -> usize {
    500
}

impl NoiseSpec {
    pub fn id(&self) -> &'static str {
        match self {
            NoiseSpec::Zero => "zero",
            NoiseSpec::Gaussian { .. } => "gaussian",
            NoiseSpec::TruncatedGaussian { .. } => "truncated_gaussian",
            NoiseSpec::ColoredArma { .. } => "colored_arma",
        }
    }

    /// ARMA(1,1) with unit-less output std `target_std`.
    pub fn arma11(ar: f64, ma: f64, target_std: f64) -> Self {
        let gain = (1.0 + 2.0 * ar * ma + ma * ma) / (1.0 - ar * ar);
        NoiseSpec::ColoredArma {
            ar: vec![ar],
            ma: vec![ma],
            white_std: target_std / gain.sqrt(),
            burn_in: default_burn_in(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(IciError::Config(format!("noise: {m}")));
        match self {
            NoiseSpec::Zero => Ok(()),
            NoiseSpec::Gaussian { std } if !(*std >= 0.0 && std.is_finite()) => {
                bad("std must be finite and nonnegative")
            }
            NoiseSpec::TruncatedGaussian { std, lower, upper } => {
                if !(*std > 0.0 && std.is_finite()) {
                    return bad("std must be positive");
                }
                if !(lower < upper) || !(*lower < 0.0 && *upper > 0.0) {
                    return bad("bounds must straddle zero");
                }
                Ok(())
            }
            NoiseSpec::ColoredArma { ar, white_std, .. } => {
                if !(*white_std >= 0.0 && white_std.is_finite()) {
                    return bad("white_std must be finite and nonnegative");
                }
                if ar.iter().map(|a| a.abs()).sum::<f64>() >= 1.0 {
                    return bad("AR coefficients must satisfy Σ|a_i| < 1");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Draws a `horizon × dim` disturbance sequence.
    pub fn sample<R: Rng + ?Sized>(&self, horizon: usize, dim: usize, rng: &mut R) -> Sequence {
        let mut v = Sequence::zeros(horizon, dim);
        match self {
            NoiseSpec::Zero => {}
            NoiseSpec::Gaussian { std } => {
                if *std > 0.0 {
                    let n = Normal::new(0.0, *std).expect("valid std");
                    for x in v.as_flat_mut().iter_mut() {
                        *x = n.sample(rng);
                    }
                }
            }
            NoiseSpec::TruncatedGaussian { std, lower, upper } => {
                let n = Normal::new(0.0, *std).expect("valid std");
                for x in v.as_flat_mut().iter_mut() {
                    *x = loop {
                        let z = n.sample(rng);
                        if z > *lower && z < *upper {
                            break z;
                        }
                    };
                }
            }
            NoiseSpec::ColoredArma {
                ar,
                ma,
                white_std,
                burn_in,
            } => {
                let n = Normal::new(0.0, white_std.max(0.0)).expect("valid std");
                let total = burn_in + horizon;
                for c in 0..dim {
                    let mut e_hist = vec![0.0; ma.len()];
                    let mut v_hist = vec![0.0; ar.len()];
                    for t in 0..total {
                        let e: f64 = if *white_std > 0.0 { n.sample(rng) } else { 0.0 };
                        let mut value = e;
                        for (a, past) in ar.iter().zip(&v_hist) {
                            value += a * past;
                        }
                        for (m, past) in ma.iter().zip(&e_hist) {
                            value += m * past;
                        }
                        shift_in(&mut v_hist, value);
                        shift_in(&mut e_hist, e);
                        if t >= *burn_in {
                            v.step_mut(t - burn_in)[c] = value;
                        }
                    }
                }
            }
        }
        v
    }
}

fn shift_in(hist: &mut [f64], value: f64) {
    if hist.is_empty() {
        return;
    }
    hist.rotate_right(1);
    hist[0] = value;
}
