use crate::error::{IciError, Result};
use crate::seqops::{feedback_inverse, negate, series, OperatorHandle};

/// `Q̃ = G(I − K∘G)⁻¹` for a strictly causal plant `G` and causal `K`.
///
/// The inverse runs the recursion `b_t = w_t + K_t(G(b)_{t:0})`, so the
/// result is strictly causal and `ICI(Q̃, K)` reproduces `G` exactly.
/// Needs the true plant; benchmarks and tests only.
pub fn construct_true_q(plant: OperatorHandle, k: OperatorHandle) -> Result<OperatorHandle> {
    if !plant.is_strictly_causal() {
        return Err(IciError::Contract(
            "construct_true_q needs a strictly causal plant".into(),
        ));
    }
    let kg = series(plant.clone(), k)?;
    let inverse = feedback_inverse(negate(kg))?;
    series(inverse, plant)
}
