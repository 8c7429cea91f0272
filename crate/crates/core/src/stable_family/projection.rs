use crate::linalg::Mat;

/// Convergence threshold and sweep budget handed to the SVD.
pub const SVD_EPS: f64 = 1e-15;
pub const SVD_MAX_ITER: usize = 200;

/// How the scale `s = max(1, σ)` was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleSource {
    /// `σ_max(A_raw) ≤ 1`: no rescaling.
    Unscaled,
    /// SVD estimate with its left/right singular vectors.
    Svd { u: Vec<f64>, v: Vec<f64> },
    /// The SVD did not converge; Frobenius norm used as the bound.
    Frobenius,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub a: Mat,
    /// The value divided out: `max(1, σ̂)`.
    pub scale: f64,
    pub sigma: f64,
    pub source: ScaleSource,
}

/// Largest singular value with its singular vectors, `(σ, u, v)`.
/// `None` when the SVD does not converge.
///
/// Power iteration was tried first and rejected: near-degenerate top
/// singular values (the common case for rotation-like recurrences) leave
/// the vectors unconverged long after `σ` has settled, and the resulting
/// gradient `u vᵀ` stalls line searches.
pub fn top_singular(a: &Mat) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    if a.cols == 0 || a.rows == 0 {
        return Some((0.0, vec![0.0; a.rows], vec![0.0; a.cols]));
    }
    let svd = a.to_nalgebra().try_svd(true, true, SVD_EPS, SVD_MAX_ITER)?;
    let (i, sigma) = svd.singular_values.iter().copied().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, x)| if x > best.1 { (i, x) } else { best },
    );
    if !sigma.is_finite() {
        return None;
    }
    let u = svd.u.as_ref()?.column(i).iter().copied().collect();
    let v = svd.v_t.as_ref()?.row(i).iter().copied().collect();
    Some((sigma, u, v))
}

/// `A = α · A_raw / max(1, σ_max(A_raw))`, so that `‖A‖₂ ≤ α`.
pub fn project_spectral(a_raw: &Mat, alpha: f64) -> Projection {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let (sigma, source) = match top_singular(a_raw) {
        Some((sigma, u, v)) => {
            if sigma <= 1.0 {
                (sigma, ScaleSource::Unscaled)
            } else {
                (sigma, ScaleSource::Svd { u, v })
            }
        }
        None => {
            let f = a_raw.frobenius();
            if f <= 1.0 {
                (f, ScaleSource::Unscaled)
            } else {
                (f, ScaleSource::Frobenius)
            }
        }
    };
    let scale = sigma.max(1.0);
    Projection {
        a: a_raw.scale(alpha / scale),
        scale,
        sigma,
        source,
    }
}

/// Pulls `∂J/∂A` back to `∂J/∂A_raw` through the projection.
pub fn projection_backward(proj: &Projection, a_raw: &Mat, alpha: f64, d_a: &Mat) -> Mat {
    let s = proj.scale;
    let mut out = d_a.scale(alpha / s);
    match &proj.source {
        ScaleSource::Unscaled => {}
        ScaleSource::Svd { u, v } => {
            // ∂σ/∂A_raw = u vᵀ
            let inner: f64 = d_a.data.iter().zip(&a_raw.data).map(|(g, a)| g * a).sum();
            let k = alpha * inner / (s * s);
            for i in 0..out.rows {
                for j in 0..out.cols {
                    out.data[i * out.cols + j] -= k * u[i] * v[j];
                }
            }
        }
        ScaleSource::Frobenius => {
            let inner: f64 = d_a.data.iter().zip(&a_raw.data).map(|(g, a)| g * a).sum();
            let k = alpha * inner / (s * s * s);
            for (o, a) in out.data.iter_mut().zip(&a_raw.data) {
                *o -= k * a;
            }
        }
    }
    out
}
