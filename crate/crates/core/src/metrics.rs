//! Normalized mean-squared error bookkeeping.

use crate::error::{Error, Result};
use crate::linalg::CVector;

/// One trial's estimate and ground truth for the full metric vector, plus the
/// corresponding pair for the quantity estimated in Phase I.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub estimate: CVector,
    pub truth: CVector,
    pub phase1_estimate: CVector,
    pub phase1_truth: CVector,
}

impl EstimationResult {
    pub fn squared_error(&self) -> f64 {
        (&self.estimate - &self.truth).norm_squared()
    }

    pub fn nmse(&self) -> Result<f64> {
        nmse(&self.estimate, &self.truth)
    }
}

/// `||a_hat - a||^2 / ||a||^2` for a single vector.
pub fn nmse(estimate: &CVector, truth: &CVector) -> Result<f64> {
    let mut b = BatchNmse::default();
    b.push_pair(estimate, truth)?;
    b.mean()
}

/// Batch NMSE: summed squared errors over summed squared norms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchNmse {
    errors: Vec<f64>,
    energies: Vec<f64>,
}

impl BatchNmse {
    pub fn push(&mut self, squared_error: f64, energy: f64) {
        self.errors.push(squared_error);
        self.energies.push(energy);
    }

    pub fn push_pair(&mut self, estimate: &CVector, truth: &CVector) -> Result<()> {
        if estimate.len() != truth.len() {
            return Err(Error::InvalidParameter(format!(
                "estimate has {} entries, truth has {}",
                estimate.len(),
                truth.len()
            )));
        }
        self.push((estimate - truth).norm_squared(), truth.norm_squared());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn mean(&self) -> Result<f64> {
        let energy: f64 = self.energies.iter().sum();
        if energy == 0.0 {
            return Err(Error::UndefinedMetric("reference vectors are all zero".into()));
        }
        Ok(self.errors.iter().sum::<f64>() / energy)
    }

    /// Delta-method standard error of the ratio estimator; 0 for fewer than two trials.
    pub fn stderr(&self) -> Result<f64> {
        let ratio = self.mean()?;
        let t = self.len();
        if t < 2 {
            return Ok(0.0);
        }
        let mean_energy = self.energies.iter().sum::<f64>() / t as f64;
        let var = self
            .errors
            .iter()
            .zip(&self.energies)
            .map(|(e, a)| (e - ratio * a).powi(2))
            .sum::<f64>()
            / (t - 1) as f64;
        Ok((var / t as f64).sqrt() / mean_energy)
    }
}
