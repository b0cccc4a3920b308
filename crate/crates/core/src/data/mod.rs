//! Trip data: records, CSV ingestion, train/test splitting, normalization and
//! seeded synthetic fleets.

mod csv_io;
mod normalize;
mod synthetic;

pub use csv_io::{load_trip_csv, write_trip_csv, CsvSchema};
pub use normalize::{fit_normalizer, NormalizationStats};
pub use synthetic::{
    generate_synthetic_fleet, AnomalySpec, PopulationSpec, SyntheticFleetConfig, SyntheticMember,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the intercept feature. When a schema lists it and the CSV lacks the
/// column, it is synthesized as exactly 1.0.
pub const CONSTANT_FEATURE: &str = "constant";

/// One time step of a trip: input features and remaining battery level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: f64,
}

/// An ordered per-vehicle time series.
///
/// `anomaly_mask`, when present, is the generator's ground truth (one flag per
/// record); real data carries none.
#[derive(Debug, Clone, PartialEq)]
pub struct TripDataset {
    pub trip_id: String,
    pub feature_names: Vec<String>,
    pub records: Vec<TripRecord>,
    pub population_tag: Option<String>,
    pub anomaly_mask: Option<Vec<bool>>,
}

impl TripDataset {
    /// Builds a dataset and checks the structural invariants: a fixed input
    /// dimension and consecutive `t` values.
    pub fn new(
        trip_id: impl Into<String>,
        feature_names: Vec<String>,
        records: Vec<TripRecord>,
    ) -> Result<Self> {
        let ds = TripDataset {
            trip_id: trip_id.into(),
            feature_names,
            records,
            population_tag: None,
            anomaly_mask: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_population(mut self, tag: impl Into<String>) -> Self {
        self.population_tag = Some(tag.into());
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Input dimension `m`.
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn constant_index(&self) -> Option<usize> {
        self.feature_names.iter().position(|f| f == CONSTANT_FEATURE)
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.feature_names.len();
        for (i, r) in self.records.iter().enumerate() {
            if r.x.len() != m {
                return Err(Error::shape(
                    format!("record {i} of trip `{}`", self.trip_id),
                    m,
                    r.x.len(),
                ));
            }
        }
        for pair in self.records.windows(2) {
            if pair[1].t != pair[0].t + 1 {
                return Err(Error::Ordering(format!(
                    "trip `{}`: record index jumps from t={} to t={}",
                    self.trip_id, pair[0].t, pair[1].t
                )));
            }
        }
        if let Some(mask) = &self.anomaly_mask {
            if mask.len() != self.records.len() {
                return Err(Error::shape(
                    format!("anomaly mask of trip `{}`", self.trip_id),
                    self.records.len(),
                    mask.len(),
                ));
            }
        }
        Ok(())
    }

    /// Consecutive sub-range `[start, start + len)`, mask included.
    pub fn slice(&self, start: usize, len: usize) -> TripDataset {
        TripDataset {
            trip_id: self.trip_id.clone(),
            feature_names: self.feature_names.clone(),
            records: self.records[start..start + len].to_vec(),
            population_tag: self.population_tag.clone(),
            anomaly_mask: self
                .anomaly_mask
                .as_ref()
                .map(|m| m[start..start + len].to_vec()),
        }
    }
}

/// First `n_train` records become the training set, the next `n_test` the
/// test set. Order is preserved; nothing is shuffled.
pub fn split_train_test(
    ds: &TripDataset,
    n_train: usize,
    n_test: usize,
) -> Result<(TripDataset, TripDataset)> {
    let requested = n_train + n_test;
    if requested > ds.len() {
        return Err(Error::Length {
            available: ds.len(),
            requested,
        });
    }
    Ok((ds.slice(0, n_train), ds.slice(n_train, n_test)))
}
