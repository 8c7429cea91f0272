use crate::error::{IciError, Result};
use crate::seqops::Sequence;

/// Mean over time of the squared Euclidean error of one trajectory.
pub fn trajectory_cost(pred: &Sequence, meas: &Sequence) -> Result<f64> {
    if pred.dim() != meas.dim() || pred.horizon() != meas.horizon() {
        return Err(IciError::Contract(format!(
            "prediction {}×{} vs measurement {}×{}",
            pred.horizon(),
            pred.dim(),
            meas.horizon(),
            meas.dim()
        )));
    }
    if meas.is_empty() {
        return Err(IciError::Contract("empty trajectory".into()));
    }
    let sse: f64 = pred
        .as_flat()
        .iter()
        .zip(meas.as_flat())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sse / meas.horizon() as f64)
}

/// `J = (1/N) Σₙ (1/T) Σₜ ‖yⁿ_t − ŷ°ⁿ_t‖²`
pub fn cost(preds: &[Sequence], meas: &[Sequence]) -> Result<f64> {
    if preds.len() != meas.len() || meas.is_empty() {
        return Err(IciError::Contract(format!(
            "{} predictions for {} trajectories",
            preds.len(),
            meas.len()
        )));
    }
    let mut total = 0.0;
    for (p, m) in preds.iter().zip(meas) {
        total += trajectory_cost(p, m)?;
    }
    Ok(total / meas.len() as f64)
}
