use crate::arx::{predict, regressors, ArxOrder, LinearModel};
use crate::data::TripDataset;
use crate::error::{Error, Result};
use crate::metrics::{sqrt_mse, AVERAGE_COLUMN};

/// Per-member test sqrt MSE with the fleet average.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationTable {
    pub trip_ids: Vec<String>,
    pub sqrt_mse: Vec<f64>,
    pub average: f64,
}

impl EvaluationTable {
    /// One header row of trip ids plus the average column, one row of values.
    pub fn to_csv(&self, method: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string()];
        header.extend(self.trip_ids.iter().cloned());
        header.push(AVERAGE_COLUMN.to_string());
        w.write_record(&header).expect("in-memory write");
        let mut row = vec![method.to_string()];
        row.extend(self.sqrt_mse.iter().map(|v| v.to_string()));
        row.push(self.average.to_string());
        w.write_record(&row).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// One-step-ahead predictions over each member's test trip with frozen
/// parameters. Input columns are taken as known profiles; lagged outputs, if
/// the order has any, are the recorded ones.
pub fn evaluate(models: &[LinearModel], test: &[TripDataset], order: ArxOrder) -> Result<EvaluationTable> {
    if models.len() != test.len() {
        return Err(Error::shape("trained models for test fleet", test.len(), models.len()));
    }
    if test.is_empty() {
        return Err(Error::EmptyDataset("test fleet".into()));
    }
    let mut values = Vec::with_capacity(test.len());
    for (model, trip) in models.iter().zip(test) {
        let dim = order.regressor_dim(trip.n_features());
        if model.dim() != dim {
            return Err(Error::shape(format!("model of member `{}`", trip.trip_id), dim, model.dim()));
        }
        let errors = regressors(trip, order)?
            .iter()
            .map(|(phi, y)| Ok(predict(model, phi)? - y))
            .collect::<Result<Vec<f64>>>()?;
        if errors.is_empty() {
            return Err(Error::EmptyDataset(format!("test trip `{}` has no usable records", trip.trip_id)));
        }
        values.push(sqrt_mse(&errors)?);
    }
    Ok(EvaluationTable {
        trip_ids: test.iter().map(|t| t.trip_id.clone()).collect(),
        average: values.iter().sum::<f64>() / values.len() as f64,
        sqrt_mse: values,
    })
}
