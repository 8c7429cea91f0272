use serde::{Deserialize, Serialize};

use crate::error::{IciError, Result};

/// Finite-horizon vector-valued signal, stored row-major (one row per time step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    dim: usize,
    data: Vec<f64>,
}

impl Sequence {
    /// Empty sequence with the given per-step dimension.
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "sequence dimension must be positive");
        Sequence {
            dim,
            data: Vec::new(),
        }
    }

    pub fn zeros(horizon: usize, dim: usize) -> Self {
        assert!(dim > 0, "sequence dimension must be positive");
        Sequence {
            dim,
            data: vec![0.0; horizon * dim],
        }
    }

    pub fn with_capacity(horizon: usize, dim: usize) -> Self {
        assert!(dim > 0, "sequence dimension must be positive");
        Sequence {
            dim,
            data: Vec::with_capacity(horizon * dim),
        }
    }

    /// Builds a sequence from flat row-major storage.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(IciError::Dimension {
                context: "Sequence::from_flat",
                expected: dim,
                got: data.len(),
            });
        }
        Ok(Sequence { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if dim == 0 {
            return Err(IciError::Config(
                "cannot infer dimension from empty rows".into(),
            ));
        }
        let mut seq = Sequence::with_capacity(rows.len(), dim);
        for row in rows {
            seq.push(row.as_ref())?;
        }
        Ok(seq)
    }

    /// Scalar sequence from a slice of values.
    pub fn scalar(values: &[f64]) -> Self {
        Sequence {
            dim: 1,
            data: values.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn step_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(IciError::Dimension {
                context: "Sequence::push",
                expected: self.dim,
                got: x.len(),
            });
        }
        self.data.extend_from_slice(x);
        Ok(())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Truncation `x_{j:i}`: steps `i..=j`, or the empty sequence when `j < i`.
    pub fn truncate(&self, i: usize, j: usize) -> Sequence {
        if j < i || i >= self.horizon() {
            return Sequence::new(self.dim);
        }
        let j = j.min(self.horizon() - 1);
        Sequence {
            dim: self.dim,
            data: self.data[i * self.dim..(j + 1) * self.dim].to_vec(),
        }
    }

    /// `(Σ_t |x_t|^p)^{1/p}` with the Euclidean norm per step.
    pub fn lp_norm(&self, p: u32) -> f64 {
        lp_norm(self, p)
    }

    pub fn sub(&self, other: &Sequence) -> Result<Sequence> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Sequence) -> Result<Sequence> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Sequence, f: impl Fn(f64, f64) -> f64) -> Result<Sequence> {
        if self.dim != other.dim {
            return Err(IciError::Dimension {
                context: "Sequence arithmetic (dim)",
                expected: self.dim,
                got: other.dim,
            });
        }
        if self.data.len() != other.data.len() {
            return Err(IciError::Dimension {
                context: "Sequence arithmetic (horizon)",
                expected: self.horizon(),
                got: other.horizon(),
            });
        }
        Ok(Sequence {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, k: f64) -> Sequence {
        Sequence {
            dim: self.dim,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Finite-horizon ℓp norm; returns 0 for the empty sequence.
pub fn lp_norm(x: &Sequence, p: u32) -> f64 {
    assert!(p >= 1, "lp_norm requires p >= 1");
    if x.is_empty() {
        return 0.0;
    }
    if p == 2 {
        return x.as_flat().iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let p = p as f64;
    x.iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}
