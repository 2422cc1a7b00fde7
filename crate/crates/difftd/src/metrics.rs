//! Value-error metrics weighted by a stationary distribution.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A strictly positive probability vector used as the weighting of a
/// weighted 2-norm.
#[derive(Debug, Clone)]
pub struct WeightedNorm {
    weights: DVector<f64>,
}

impl WeightedNorm {
    pub fn new(weights: DVector<f64>) -> Result<Self> {
        if weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
            return Err(Error::Input("norm weights must be strictly positive".into()));
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Input(format!("norm weights sum to {total}, expected 1")));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Weighted 2-norm ‖x‖_d = sqrt(Σ_s d(s) x(s)²).
    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.weights
            .iter()
            .zip(x.iter())
            .map(|(&w, &xi)| w * xi * xi)
            .sum::<f64>()
            .sqrt()
    }
}

/// Root-mean-squared value error minimized over constant offsets:
/// inf_c ‖v − (v_ref + c·e)‖_d.
///
/// The minimizer of the weighted quadratic in c is the weighted mean of the
/// difference, so the infimum is computed in closed form by centering.
pub fn rmsve_tvr(v: &DVector<f64>, v_ref: &DVector<f64>, norm: &WeightedNorm) -> Result<f64> {
    if v.len() != v_ref.len() || v.len() != norm.weights.len() {
        return Err(Error::Shape(format!(
            "rmsve inputs have lengths {}, {}, {}",
            v.len(),
            v_ref.len(),
            norm.weights.len()
        )));
    }
    let mut offset = 0.0;
    for i in 0..v.len() {
        offset += norm.weights[i] * (v[i] - v_ref[i]);
    }
    let mut sq = 0.0;
    for i in 0..v.len() {
        let centered = v[i] - v_ref[i] - offset;
        sq += norm.weights[i] * centered * centered;
    }
    Ok(sq.sqrt())
}
