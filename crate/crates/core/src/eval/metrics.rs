use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{IciError, Result};
use crate::seqops::Sequence;

/// `1 − Σ‖y − ŷ°‖² / Σ‖y − ȳ‖²` with `ȳ` the per-component mean over all
/// trajectories and steps. `None` when the measurements are constant.
pub fn r_squared(meas: &[Sequence], preds: &[Sequence]) -> Result<Option<f64>> {
    check_pairs(meas, preds)?;
    let dim = meas[0].dim();
    let mut mean = vec![0.0; dim];
    let mut count = 0usize;
    for m in meas {
        for row in m.iter() {
            for (a, v) in mean.iter_mut().zip(row) {
                *a += v;
            }
            count += 1;
        }
    }
    mean.iter_mut().for_each(|v| *v /= count as f64);
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (m, p) in meas.iter().zip(preds) {
        for (i, (a, b)) in m.as_flat().iter().zip(p.as_flat()).enumerate() {
            ss_res += (a - b) * (a - b);
            let c = a - mean[i % dim];
            ss_tot += c * c;
        }
    }
    if ss_tot == 0.0 {
        return Ok(None);
    }
    Ok(Some(1.0 - ss_res / ss_tot))
}

fn check_pairs(meas: &[Sequence], preds: &[Sequence]) -> Result<()> {
    if meas.is_empty() || meas.len() != preds.len() {
        return Err(IciError::Contract(format!(
            "{} measurements vs {} predictions",
            meas.len(),
            preds.len()
        )));
    }
    for (m, p) in meas.iter().zip(preds) {
        if m.dim() != p.dim() || m.horizon() != p.horizon() || m.dim() != meas[0].dim() {
            return Err(IciError::Contract(
                "measurement/prediction shapes differ".into(),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Normal,
    StudentT,
}

/// `(mean, halfwidth)` of a 95% interval: `z·s/√n` with the sample standard
/// deviation `s` and `z = 1.96` (or the Student-t quantile).
pub fn confidence_interval(values: &[f64], method: CiMethod) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(IciError::Contract(format!(
            "confidence interval needs at least 2 values, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let z = match method {
        CiMethod::Normal => 1.96,
        CiMethod::StudentT => StudentsT::new(0.0, 1.0, nf - 1.0)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975),
    };
    Ok((mean, z * var.sqrt() / nf.sqrt()))
}

/// Mean and 95% halfwidth of a metric across seeds. Missing values make
/// the mean not computable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub mean: Option<f64>,
    pub ci95_halfwidth: Option<f64>,
    pub n: usize,
}

impl Metric {
    pub fn from_values(values: &[Option<f64>], method: CiMethod) -> Metric {
        let n = values.len();
        let present: Option<Vec<f64>> = values.iter().copied().collect();
        match present {
            Some(v) if !v.is_empty() => {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let half = confidence_interval(&v, method).ok().map(|(_, h)| h);
                Metric {
                    mean: Some(mean),
                    ci95_halfwidth: half,
                    n,
                }
            }
            _ => Metric {
                mean: None,
                ci95_halfwidth: None,
                n,
            },
        }
    }
}
