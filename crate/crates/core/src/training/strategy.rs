use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{IciError, Result};
use crate::ici::{IciModel, Trajectory};
use crate::plants::ControllerSpec;
use crate::seqops::{OperatorHandle, Sequence};
use crate::stable_family::{
    forward, DifferentiableFeedback, Realized, StableOperator, StableOperatorParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    /// Direct identification: `ŷ° = Ĝ(u)` with the family instance as `Ĝ`.
    #[serde(rename = "S1_direct_id")]
    S1DirectId,
    /// Direct identification through the interconnection: `ŷ° = Q̂(u − K(ŷ°))`.
    #[serde(rename = "S2_dir_ici")]
    S2DirIci,
    /// Indirect identification: `ŷ° = Q̂(r)`.
    #[serde(rename = "S3_indir_ici")]
    S3IndirIci,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::S1DirectId,
        StrategyKind::S2DirIci,
        StrategyKind::S3IndirIci,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::S1DirectId => "S1_direct_id",
            StrategyKind::S2DirIci => "S2_dir_ici",
            StrategyKind::S3IndirIci => "S3_indir_ici",
        }
    }

    /// Whether the family instance is `Q̂` inside the interconnection.
    pub fn uses_ici(&self) -> bool {
        !matches!(self, StrategyKind::S1DirectId)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = IciError;
    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| IciError::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub model: StableOperatorParams,
    pub controller: ControllerSpec,
}

impl StrategySpec {
    pub fn new(
        kind: StrategyKind,
        model: StableOperatorParams,
        controller: ControllerSpec,
    ) -> Self {
        StrategySpec {
            kind,
            model,
            controller,
        }
    }

    /// The learned plant model `Ĝ` as a runnable operator.
    pub fn plant_model(&self) -> Result<OperatorHandle> {
        let op = Box::new(StableOperator::new(self.model.clone()));
        if self.kind.uses_ici() {
            Ok(Box::new(IciModel::new(op, self.controller.boxed())?))
        } else {
            Ok(op)
        }
    }

    pub(crate) fn regressor<'a>(&self, tr: &'a Trajectory) -> &'a Sequence {
        match self.kind {
            StrategyKind::S3IndirIci => &tr.r,
            _ => &tr.u,
        }
    }

    pub(crate) fn feedback(&self) -> Option<&dyn DifferentiableFeedback> {
        match self.kind {
            StrategyKind::S2DirIci => Some(&self.controller),
            _ => None,
        }
    }
}

/// `ŷ°` for one trajectory under the strategy's constraint, from reset.
pub fn predict(strategy: &StrategySpec, tr: &Trajectory) -> Result<Sequence> {
    predict_realized(strategy, &Realized::new(strategy.model.clone()), tr)
}

pub(crate) fn predict_realized(
    strategy: &StrategySpec,
    realized: &Realized,
    tr: &Trajectory,
) -> Result<Sequence> {
    let rec = forward(realized, strategy.regressor(tr), strategy.feedback())?;
    Ok(rec.outputs(strategy.model.out_dim()))
}
