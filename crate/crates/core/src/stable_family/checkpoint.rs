//! JSON checkpoint: a flat list of named arrays with shapes, plus `alpha`,
//! `n_h` and `n_linear`. Floats use shortest round-trip formatting, so
//! save/load is bit-exact.

use serde::{Deserialize, Serialize};

use super::params::StableOperatorParams;
use crate::error::{IciError, Result};
use crate::linalg::Mat;

pub const CHECKPOINT_FORMAT: &str = "ici-stable-operator/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub n_h: usize,
    pub n_linear: usize,
    pub alpha: f64,
    pub num_params: usize,
    pub arrays: Vec<NamedArray>,
}

const NAMES: [&str; 5] = ["A_raw", "B", "C", "b", "c"];

impl Checkpoint {
    pub fn from_params(p: &StableOperatorParams) -> Self {
        let mat = |name: &str, m: &Mat| NamedArray {
            name: name.into(),
            shape: vec![m.rows, m.cols],
            data: m.data.clone(),
        };
        let vec = |name: &str, v: &[f64]| NamedArray {
            name: name.into(),
            shape: vec![v.len()],
            data: v.to_vec(),
        };
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            n_h: p.n_h(),
            n_linear: p.n_linear,
            alpha: p.alpha,
            num_params: p.num_params(),
            arrays: vec![
                mat(NAMES[0], &p.a_raw),
                mat(NAMES[1], &p.b),
                mat(NAMES[2], &p.c),
                vec(NAMES[3], &p.bias_h),
                vec(NAMES[4], &p.bias_y),
            ],
        }
    }

    pub fn into_params(self) -> Result<StableOperatorParams> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(IciError::Parse(format!(
                "unknown checkpoint format {:?}",
                self.format
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(IciError::Parse(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if self.n_h == 0 || self.n_linear > self.n_h {
            return Err(IciError::Parse(format!(
                "invalid sizing n_h = {}, n_linear = {}",
                self.n_h, self.n_linear
            )));
        }
        if self.arrays.len() != NAMES.len() {
            return Err(IciError::Parse(format!(
                "expected {} arrays, found {}",
                NAMES.len(),
                self.arrays.len()
            )));
        }
        for (arr, name) in self.arrays.iter().zip(NAMES) {
            if arr.name != name {
                return Err(IciError::Parse(format!(
                    "expected array {name:?}, found {:?}",
                    arr.name
                )));
            }
            let expected = arr
                .shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| IciError::Parse(format!("shape overflow in {name}")))?;
            if expected != arr.data.len() {
                return Err(IciError::Parse(format!(
                    "array {name} has shape {:?} but {} values",
                    arr.shape,
                    arr.data.len()
                )));
            }
            if arr.data.iter().any(|v| !v.is_finite()) {
                return Err(IciError::Parse(format!(
                    "array {name} has non-finite values"
                )));
            }
        }
        let n = self.n_h;
        let shape2 = |i: usize| -> Result<(usize, usize)> {
            match self.arrays[i].shape.as_slice() {
                [r, c] => Ok((*r, *c)),
                s => Err(IciError::Parse(format!(
                    "array {} must be 2-d, got shape {s:?}",
                    NAMES[i]
                ))),
            }
        };
        let (ar, ac) = shape2(0)?;
        let (br, du) = shape2(1)?;
        let (dy, cc) = shape2(2)?;
        if (ar, ac) != (n, n) || br != n || cc != n || du == 0 || dy == 0 {
            return Err(IciError::Parse("inconsistent matrix shapes".into()));
        }
        if self.arrays[3].shape != [n] || self.arrays[4].shape != [dy] {
            return Err(IciError::Parse("inconsistent bias shapes".into()));
        }
        let params = StableOperatorParams {
            a_raw: Mat::from_rows(n, n, self.arrays[0].data.clone()),
            b: Mat::from_rows(n, du, self.arrays[1].data.clone()),
            c: Mat::from_rows(dy, n, self.arrays[2].data.clone()),
            bias_h: self.arrays[3].data.clone(),
            bias_y: self.arrays[4].data.clone(),
            alpha: self.alpha,
            n_linear: self.n_linear,
        };
        if params.num_params() != self.num_params {
            return Err(IciError::Parse(format!(
                "num_params {} does not match arrays ({})",
                self.num_params,
                params.num_params()
            )));
        }
        Ok(params)
    }
}

impl StableOperatorParams {
    pub fn to_checkpoint_json(&self) -> String {
        serde_json::to_string_pretty(&Checkpoint::from_params(self))
            .expect("checkpoint serialization is infallible")
    }

    pub fn from_checkpoint_json(s: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(s).map_err(|e| IciError::Parse(format!("checkpoint: {e}")))?;
        ck.into_params()
    }
}
