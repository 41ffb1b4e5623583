//! Streaming per-feature moments and z-score standardization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Running count, mean and sum of squared deviations per feature
/// (Welford's update, Chan et al.'s merge).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator<T> {
    count: u64,
    mean: Vec<T>,
    m2: Vec<T>,
}

impl<T: Scalar> MomentAccumulator<T> {
    pub fn new(dim: usize) -> Self {
        MomentAccumulator {
            count: 0,
            mean: vec![T::zero(); dim],
            m2: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Population variances (divisor N).
    pub fn variance(&self) -> Vec<T> {
        let n = T::of(self.count as f64);
        self.m2.iter().map(|&m| if self.count == 0 { T::zero() } else { m / n }).collect()
    }

    /// Adds one sample. Rejects the whole sample if any component is not
    /// finite, leaving the accumulator unchanged.
    pub fn accumulate(&mut self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "sample has {} features, accumulator expects {}",
                x.len(),
                self.dim()
            )));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                feature: j,
                sample: self.count,
            });
        }
        self.count += 1;
        let n = T::of(self.count as f64);
        for ((mean, m2), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *mean;
            *mean = *mean + delta / n;
            *m2 = *m2 + delta * (v - *mean);
        }
        Ok(())
    }

    /// Combines two accumulators as if every sample had been added to one.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.dim(), other.dim(), "merging accumulators of different width");
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = T::of(self.count as f64);
        let nb = T::of(other.count as f64);
        let n = na + nb;
        for j in 0..self.dim() {
            let delta = other.mean[j] - self.mean[j];
            self.mean[j] = self.mean[j] + delta * nb / n;
            self.m2[j] = self.m2[j] + other.m2[j] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn finalize(&self) -> Result<StandardizationStats<T>> {
        if self.count == 0 {
            return Err(Error::EmptyInput("cannot finalize statistics of zero samples".into()));
        }
        let sigma = self.variance().into_iter().map(|v| v.max(T::zero()).sqrt()).collect();
        Ok(StandardizationStats {
            count: self.count,
            mu: self.mean.clone(),
            sigma,
        })
    }
}

/// Feature means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StandardizationStats<T> {
    pub count: u64,
    pub mu: Vec<T>,
    pub sigma: Vec<T>,
}

impl<T: Scalar> StandardizationStats<T> {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `(x_j - mu_j) / sigma_j`, or 0 for a constant feature.
    pub fn standardize(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        self.standardize_into(x, &mut out);
        out
    }

    pub fn standardize_into(&self, x: &[T], out: &mut [T]) {
        for (j, (o, &v)) in out.iter_mut().zip(x).enumerate() {
            let s = self.sigma[j];
            *o = if s > T::zero() { (v - self.mu[j]) / s } else { T::zero() };
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid(format!("bad statistics record: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Accumulates all rows and finalizes in one call.
pub fn fit_stats<T: Scalar, R: AsRef<[T]>>(rows: &[R]) -> Result<StandardizationStats<T>> {
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    let mut acc = MomentAccumulator::new(dim);
    for r in rows {
        acc.accumulate(r.as_ref())?;
    }
    acc.finalize()
}
