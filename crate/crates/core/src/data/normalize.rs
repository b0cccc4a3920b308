use serde::{Deserialize, Serialize};

use super::TripDataset;
use crate::error::{Error, Result};

/// Per-feature z-score statistics fitted on training records.
///
/// Features with zero deviation are flagged and only mean-centred. Features
/// marked passthrough are left untouched (used for the intercept column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub zero_deviation: Vec<bool>,
    #[serde(default)]
    pub passthrough: Vec<bool>,
}

/// Population mean and standard deviation of every input feature.
pub fn fit_normalizer(train: &TripDataset) -> Result<NormalizationStats> {
    if train.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "cannot fit normalizer on empty trip `{}`",
            train.trip_id
        )));
    }
    let m = train.n_features();
    let n = train.len() as f64;
    let mut mean = vec![0.0; m];
    for r in &train.records {
        for (acc, v) in mean.iter_mut().zip(&r.x) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    let mut var = vec![0.0; m];
    for r in &train.records {
        for ((acc, v), mu) in var.iter_mut().zip(&r.x).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
    let zero_deviation = std.iter().map(|&s| s == 0.0).collect();
    Ok(NormalizationStats {
        mean,
        std,
        zero_deviation,
        passthrough: vec![false; m],
    })
}

impl NormalizationStats {
    /// Excludes feature `index` from normalization.
    pub fn with_passthrough(mut self, index: usize) -> Self {
        if index < self.passthrough.len() {
            self.passthrough[index] = true;
        }
        self
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.passthrough.get(j).copied().unwrap_or(false) {
                    v
                } else if self.zero_deviation[j] {
                    v - self.mean[j]
                } else {
                    (v - self.mean[j]) / self.std[j]
                }
            })
            .collect()
    }

    /// Normalizes inputs with these (training) statistics. Outputs `y` are
    /// left as they are.
    pub fn apply(&self, ds: &TripDataset) -> Result<TripDataset> {
        if ds.n_features() != self.n_features() {
            return Err(Error::shape(
                format!("normalizer applied to trip `{}`", ds.trip_id),
                self.n_features(),
                ds.n_features(),
            ));
        }
        let mut out = ds.clone();
        for r in &mut out.records {
            r.x = self.transform(&r.x);
        }
        Ok(out)
    }
}
