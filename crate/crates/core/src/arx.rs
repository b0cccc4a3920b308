//! Linear-in-parameters ARX predictor.
//!
//! The regressor at time `t` stacks `n_a` output lags followed by, for each
//! input attribute, its `n_b` most recent values:
//!
//! ```text
//! phi(t) = [y(t-1) .. y(t-n_a), x_1(t) .. x_1(t-n_b+1), .., x_m(t) .. x_m(t-n_b+1)]
//! ```
//!
//! Every coefficient is learnable, including the leading input coefficients.
//! Models are trained online by a thresholded gradient step on the squared
//! one-step prediction error.

use serde::{Deserialize, Serialize};

use crate::data::{TripDataset, TripRecord};
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArxOrder {
    pub n_a: usize,
    pub n_b: usize,
}

impl Default for ArxOrder {
    /// Current inputs only, no output lag.
    fn default() -> Self {
        ArxOrder { n_a: 0, n_b: 1 }
    }
}

impl ArxOrder {
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        let order = ArxOrder { n_a, n_b };
        order.validate()?;
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_a > MAX_ORDER || !(1..=MAX_ORDER).contains(&self.n_b) {
            return Err(Error::Config(format!(
                "ARX order (n_a={}, n_b={}) outside n_a in [0, {MAX_ORDER}], n_b in [1, {MAX_ORDER}]",
                self.n_a, self.n_b
            )));
        }
        Ok(())
    }

    /// Earliest index with every lag available.
    pub fn first_usable(&self) -> usize {
        self.n_a.max(self.n_b - 1)
    }

    pub fn regressor_dim(&self, n_inputs: usize) -> usize {
        self.n_a + n_inputs * self.n_b
    }
}

/// Regressor vector `phi(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor(pub Vec<f64>);

impl Regressor {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Builds `phi(t)` from the records of one trip.
pub fn build_regressor(history: &[TripRecord], order: ArxOrder, t: usize) -> Result<Regressor> {
    let earliest = order.first_usable();
    if t < earliest {
        return Err(Error::Lag { t, earliest });
    }
    if t >= history.len() {
        return Err(Error::Length {
            available: history.len(),
            requested: t + 1,
        });
    }
    let m = history[t].x.len();
    let mut phi = Vec::with_capacity(order.regressor_dim(m));
    for lag in 1..=order.n_a {
        phi.push(history[t - lag].y);
    }
    for i in 0..m {
        for lag in 0..order.n_b {
            let rec = &history[t - lag];
            if rec.x.len() != m {
                return Err(Error::shape(format!("input vector at t={}", t - lag), m, rec.x.len()));
            }
            phi.push(rec.x[i]);
        }
    }
    Ok(Regressor(phi))
}

/// Parameter vector of an ARX predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub params: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            params: vec![0.0; dim],
        }
    }

    pub fn new(params: Vec<f64>) -> Result<Self> {
        ensure_finite(&params, "model parameters")?;
        Ok(LinearModel { params })
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    /// `w <- w + step`.
    pub fn apply_step(&mut self, step: &[f64]) -> Result<()> {
        if step.len() != self.params.len() {
            return Err(Error::shape("model update", self.params.len(), step.len()));
        }
        for (w, g) in self.params.iter_mut().zip(step) {
            *w += g;
        }
        ensure_finite(&self.params, "updated model parameters")
    }
}

/// One iteration's update step (the learned result shared between members).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedResult {
    pub step: Vec<f64>,
    pub iteration: usize,
}

pub(crate) fn ensure_finite(v: &[f64], what: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("{what}: entry {i} is {}", v[i]))),
        None => Ok(()),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `w . phi`.
pub fn predict(model: &LinearModel, phi: &Regressor) -> Result<f64> {
    if model.dim() != phi.len() {
        return Err(Error::shape("prediction", model.dim(), phi.len()));
    }
    Ok(dot(&model.params, phi.as_slice()))
}

/// Outcome of one thresholded learning step.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdOutcome {
    /// Prediction error `w . phi - y` before the update.
    pub error: f64,
    /// `None` when `|error| <= delta` and the model was left alone.
    pub result: Option<LearnedResult>,
}

/// Descent step on `(y - w . phi)^2`, skipped when the prediction error is
/// within `delta`. On update, `g = 2 lambda (y - w . phi) phi` and `w += g`.
pub fn sgd_step(
    model: &mut LinearModel,
    phi: &Regressor,
    y: f64,
    lambda: f64,
    delta: f64,
    iteration: usize,
) -> Result<SgdOutcome> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("learning step must be positive, got {lambda}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::Config(format!("update threshold must be non-negative, got {delta}")));
    }
    if !y.is_finite() {
        return Err(Error::Numeric(format!("non-finite target {y}")));
    }
    ensure_finite(phi.as_slice(), "regressor")?;
    let error = predict(model, phi)? - y;
    if error.abs() <= delta {
        return Ok(SgdOutcome { error, result: None });
    }
    let scale = -2.0 * lambda * error;
    let step: Vec<f64> = phi.as_slice().iter().map(|p| scale * p).collect();
    ensure_finite(&step, "gradient step")?;
    model.apply_step(&step)?;
    Ok(SgdOutcome {
        error,
        result: Some(LearnedResult { step, iteration }),
    })
}

/// Fit index in percent: `(1 - |y_hat - y| / |y - mean(y)|) * 100`.
pub fn fit_index(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    if y_hat.len() != y.len() {
        return Err(Error::shape("fit index series", y.len(), y_hat.len()));
    }
    if y.len() < 2 {
        return Err(Error::DegenerateSeries(format!(
            "fit index needs at least 2 samples, got {}",
            y.len()
        )));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let den = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::DegenerateSeries("output series is constant".into()));
    }
    let num = y_hat
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok((1.0 - num / den) * 100.0)
}

/// Builds every regressor of a trip, from the first usable index onward.
pub fn regressors(ds: &TripDataset, order: ArxOrder) -> Result<Vec<(Regressor, f64)>> {
    (order.first_usable()..ds.len())
        .map(|t| Ok((build_regressor(&ds.records, order, t)?, ds.records[t].y)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelectionConfig {
    /// Candidate orders (each maps to an `ArxOrder`, see `order_for`).
    pub candidates: Vec<usize>,
    /// Include `n_a = order` output lags; otherwise `n_a = 0`.
    #[serde(default)]
    pub with_output_lag: bool,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Base learning step; divided by the number of lag blocks per candidate
    /// so that the regressor norm growth does not destabilize large orders.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Pick the smallest order whose fit is within this many percentage
    /// points of the best.
    #[serde(default = "default_fit_tolerance")]
    pub fit_tolerance: f64,
}

fn default_epochs() -> usize {
    5
}
fn default_lambda() -> f64 {
    0.01
}
fn default_fit_tolerance() -> f64 {
    2.0
}

impl Default for OrderSelectionConfig {
    fn default() -> Self {
        OrderSelectionConfig {
            candidates: (1..=MAX_ORDER).collect(),
            with_output_lag: false,
            epochs: default_epochs(),
            lambda: default_lambda(),
            fit_tolerance: default_fit_tolerance(),
        }
    }
}

impl OrderSelectionConfig {
    pub fn order_for(&self, candidate: usize) -> Result<ArxOrder> {
        let n_a = if self.with_output_lag { candidate } else { 0 };
        ArxOrder::new(n_a, candidate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSelection {
    pub chosen: ArxOrder,
    /// `(candidate, fit %)` in candidate order.
    pub fits: Vec<(usize, f64)>,
}

impl OrderSelection {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("order,fit_percent\n");
        for (order, fit) in &self.fits {
            out.push_str(&format!("{order},{fit}\n"));
        }
        out
    }
}

/// Trains one model per candidate with plain SGD passes over `train`, scores
/// each with the fit index of its one-step predictions, and picks the
/// smallest order within `fit_tolerance` of the best fit.
pub fn select_order(train: &TripDataset, cfg: &OrderSelectionConfig) -> Result<OrderSelection> {
    if cfg.candidates.is_empty() {
        return Err(Error::Config("no candidate orders".into()));
    }
    let m = train.n_features();
    let mut fits = Vec::with_capacity(cfg.candidates.len());
    for &candidate in &cfg.candidates {
        let order = cfg.order_for(candidate)?;
        let samples = regressors(train, order)?;
        if samples.len() < 2 {
            return Err(Error::Lag {
                t: train.len().saturating_sub(1),
                earliest: order.first_usable() + 1,
            });
        }
        let lambda = cfg.lambda / (order.n_b + usize::from(order.n_a > 0)) as f64;
        let mut model = LinearModel::zeros(order.regressor_dim(m));
        for epoch in 0..cfg.epochs {
            for (k, (phi, y)) in samples.iter().enumerate() {
                sgd_step(&mut model, phi, *y, lambda, 0.0, epoch * samples.len() + k)?;
            }
        }
        let y_hat = samples
            .iter()
            .map(|(phi, _)| predict(&model, phi))
            .collect::<Result<Vec<_>>>()?;
        let y: Vec<f64> = samples.iter().map(|(_, y)| *y).collect();
        fits.push((candidate, fit_index(&y_hat, &y)?));
    }
    let best = fits.iter().map(|(_, f)| *f).fold(f64::NEG_INFINITY, f64::max);
    let chosen = fits
        .iter()
        .filter(|(_, f)| *f >= best - cfg.fit_tolerance)
        .map(|(c, _)| *c)
        .min()
        .expect("best candidate always qualifies");
    Ok(OrderSelection {
        chosen: cfg.order_for(chosen)?,
        fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: usize, x: Vec<f64>, y: f64) -> TripRecord {
        TripRecord { t, x, y }
    }

    #[test]
    fn current_inputs_only_layout() {
        let h = vec![rec(0, vec![1.0, 2.0], 9.0), rec(1, vec![3.0, 4.0], 8.0)];
        let phi = build_regressor(&h, ArxOrder { n_a: 0, n_b: 1 }, 1).unwrap();
        assert_eq!(phi.0, vec![3.0, 4.0]);
        assert_eq!(phi.len(), ArxOrder::default().regressor_dim(2));
    }

    #[test]
    fn output_lag_layout() {
        let h = vec![rec(0, vec![5.0], 9.0), rec(1, vec![6.0], 8.0)];
        let phi = build_regressor(&h, ArxOrder { n_a: 1, n_b: 1 }, 1).unwrap();
        assert_eq!(phi.0, vec![9.0, 6.0]);
    }

    #[test]
    fn input_lags_grouped_per_attribute() {
        let h: Vec<_> = (0..4)
            .map(|t| rec(t, vec![t as f64, 10.0 + t as f64], 100.0 + t as f64))
            .collect();
        let phi = build_regressor(&h, ArxOrder { n_a: 2, n_b: 2 }, 3).unwrap();
        assert_eq!(phi.0, vec![102.0, 101.0, 3.0, 2.0, 13.0, 12.0]);
    }

    #[test]
    fn lag_error_names_earliest() {
        let h = vec![rec(0, vec![1.0], 0.0)];
        match build_regressor(&h, ArxOrder { n_a: 1, n_b: 1 }, 0) {
            Err(Error::Lag { t, earliest }) => assert_eq!((t, earliest), (0, 1)),
            other => panic!("expected lag error, got {other:?}"),
        }
    }

    #[test]
    fn order_bounds() {
        assert!(ArxOrder::new(0, 0).is_err());
        assert!(ArxOrder::new(31, 1).is_err());
        assert!(ArxOrder::new(30, 30).is_ok());
    }

    #[test]
    fn predict_examples() {
        let m = LinearModel::new(vec![2.0, 3.0]).unwrap();
        assert_eq!(predict(&m, &Regressor(vec![1.0, 1.0])).unwrap(), 5.0);
        let z = LinearModel::zeros(2);
        assert_eq!(predict(&z, &Regressor(vec![-7.0, 1e6])).unwrap(), 0.0);
        let m = LinearModel::new(vec![0.2]).unwrap();
        assert_eq!(predict(&m, &Regressor(vec![1.0])).unwrap(), 0.2);
        assert!(matches!(predict(&m, &Regressor(vec![1.0, 2.0])), Err(Error::Shape { .. })));
    }

    #[test]
    fn sgd_step_example() {
        let mut m = LinearModel::zeros(1);
        let out = sgd_step(&mut m, &Regressor(vec![1.0]), 1.0, 0.1, 0.0, 0).unwrap();
        assert_eq!(out.error, -1.0);
        let g = out.result.unwrap();
        assert!((g.step[0] - 0.2).abs() < 1e-15);
        assert!((m.params[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn sgd_stationary_point() {
        let mut m = LinearModel::new(vec![2.0, 1.0]).unwrap();
        let out = sgd_step(&mut m, &Regressor(vec![1.0, 1.0]), 3.0, 0.1, 0.0, 0).unwrap();
        assert_eq!(out.error, 0.0);
        assert!(out.result.is_none());
        assert_eq!(m.params, vec![2.0, 1.0]);
    }

    #[test]
    fn sgd_threshold_skips() {
        let mut m = LinearModel::zeros(1);
        let out = sgd_step(&mut m, &Regressor(vec![1.0]), 0.5, 0.1, 1.0, 0).unwrap();
        assert!(out.result.is_none());
        assert_eq!(m.params, vec![0.0]);
    }

    #[test]
    fn sgd_rejects_bad_inputs() {
        let mut m = LinearModel::zeros(1);
        assert!(sgd_step(&mut m, &Regressor(vec![f64::NAN]), 0.5, 0.1, 0.0, 0).is_err());
        assert!(sgd_step(&mut m, &Regressor(vec![1.0]), f64::INFINITY, 0.1, 0.0, 0).is_err());
        assert!(sgd_step(&mut m, &Regressor(vec![1.0]), 1.0, 0.0, 0.0, 0).is_err());
        assert!(sgd_step(&mut m, &Regressor(vec![1.0]), 1.0, 0.1, -1.0, 0).is_err());
    }

    #[test]
    fn fit_index_examples() {
        let y = [1.0, 3.0, 2.0, 6.0];
        assert!((fit_index(&y, &y).unwrap() - 100.0).abs() < 1e-12);
        let mean = [3.0; 4];
        assert!(fit_index(&mean, &y).unwrap().abs() < 1e-12);
        assert!(fit_index(&[1.0, 1.0], &[0.0, 2.0]).unwrap().abs() < 1e-12);
        assert!(matches!(fit_index(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::DegenerateSeries(_))));
        // can go negative
        assert!(fit_index(&[10.0, -10.0], &[0.0, 2.0]).unwrap() < 0.0);
    }

    #[test]
    fn single_candidate_is_returned() {
        let records: Vec<_> = (0..50)
            .map(|t| {
                let u = ((t * 37) % 11) as f64 / 10.0;
                rec(t, vec![1.0, u], 0.5 + 2.0 * u)
            })
            .collect();
        let ds = TripDataset::new("s", vec!["constant".into(), "u".into()], records).unwrap();
        let cfg = OrderSelectionConfig {
            candidates: vec![1],
            ..Default::default()
        };
        let sel = select_order(&ds, &cfg).unwrap();
        assert_eq!(sel.chosen, ArxOrder { n_a: 0, n_b: 1 });
        assert_eq!(sel.fits.len(), 1);
        assert!(sel.to_csv().starts_with("order,fit_percent\n1,"));
    }
}
