use crate::error::{Error, Result};

/// Truncation of the Gaussian support, in standard deviations.
pub const GAUSSIAN_TRUNCATE: f64 = 4.0;

/// Symmetric, normalized 1D convolution kernel of length `2 * radius + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel1D {
    radius: usize,
    weights: Vec<f64>,
}

impl Kernel1D {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Sampled Gaussian with radius `ceil(4 * sigma)`, normalized to unit sum.
pub fn gaussian_kernel_1d(sigma: f64) -> Result<Kernel1D> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let radius = (GAUSSIAN_TRUNCATE * sigma).ceil() as usize;
    let denom = 2.0 * sigma * sigma;
    // Build one half and mirror it so the weights are exactly symmetric.
    let half: Vec<f64> = (0..=radius)
        .map(|d| (-((d * d) as f64) / denom).exp())
        .collect();
    let mut weights = Vec::with_capacity(2 * radius + 1);
    weights.extend(half.iter().rev());
    weights.extend(half.iter().skip(1));
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Ok(Kernel1D { radius, weights })
}
