//! Sliding-window anomaly detection on input vectors.
//!
//! The `K` most recent anomaly-free inputs give an element-wise mean `E` and
//! population standard deviation `s`. A new input is normal iff every
//! coordinate lies in `[E - theta * s, E + theta * s]`. Anomalous inputs never
//! enter the window, so a burst of anomalies cannot widen the region.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Window length `K`.
    pub window: usize,
    /// Region half-width in standard deviations.
    pub theta: f64,
    /// Lower bound on the per-feature deviation used for the region.
    #[serde(default = "default_sigma_floor")]
    pub sigma_floor: f64,
}

fn default_sigma_floor() -> f64 {
    1e-9
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window: 10,
            theta: 3.0,
            sigma_floor: default_sigma_floor(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config(format!("detector window must be >= 2, got {}", self.window)));
        }
        if !(self.theta > 0.0) {
            return Err(Error::Config(format!("detector theta must be > 0, got {}", self.theta)));
        }
        if !(self.sigma_floor >= 0.0 && self.sigma_floor.is_finite()) {
            return Err(Error::Config(format!(
                "detector sigma_floor must be finite and >= 0, got {}",
                self.sigma_floor
            )));
        }
        Ok(())
    }
}

/// Ring buffer of the most recent admitted inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingWindow {
    capacity: usize,
    entries: VecDeque<Vec<f64>>,
}

impl SlidingWindow {
    pub fn new(capacity: usize) -> Self {
        SlidingWindow {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn from_entries(capacity: usize, entries: impl IntoIterator<Item = Vec<f64>>) -> Result<Self> {
        let mut w = SlidingWindow::new(capacity);
        for e in entries {
            w.push(e)?;
        }
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> Option<usize> {
        self.entries.front().map(Vec::len)
    }

    pub fn entries(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.entries.iter()
    }

    /// Appends `x`, evicting the oldest entry when full.
    pub fn push(&mut self, x: Vec<f64>) -> Result<()> {
        if let Some(m) = self.dim() {
            if x.len() != m {
                return Err(Error::shape("window entry", m, x.len()));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(x);
        Ok(())
    }
}

/// Element-wise mean and population standard deviation of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Statistics of a full window; `None` while it is still warming up.
pub fn window_stats(w: &SlidingWindow) -> Option<WindowStats> {
    if !w.is_full() || w.is_empty() {
        return None;
    }
    let k = w.len() as f64;
    let m = w.dim()?;
    let mut mean = vec![0.0; m];
    for e in w.entries() {
        for (acc, v) in mean.iter_mut().zip(e) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= k);
    let mut var = vec![0.0; m];
    for e in w.entries() {
        for ((acc, v), mu) in var.iter_mut().zip(e).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let std = var.into_iter().map(|v| (v / k).sqrt()).collect();
    Some(WindowStats { mean, std })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PredictiveRegion {
    /// Index of the first coordinate outside the region, if any.
    pub fn first_violation(&self, x: &[f64]) -> Option<usize> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .position(|(v, (lo, hi))| !(lo <= v && v <= hi))
    }
}

pub fn predictive_region(stats: &WindowStats, theta: f64, sigma_floor: f64) -> PredictiveRegion {
    let (lower, upper) = stats
        .mean
        .iter()
        .zip(&stats.std)
        .map(|(&e, &s)| {
            let half = theta * s.max(sigma_floor);
            (e - half, e + half)
        })
        .unzip();
    PredictiveRegion { lower, upper }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detection {
    /// Fewer than `K` admitted samples so far; treated as normal.
    Warmup,
    Normal,
    /// `feature` is the first coordinate outside the region.
    Anomaly { feature: usize },
}

impl Detection {
    pub fn is_anomaly(&self) -> bool {
        matches!(self, Detection::Anomaly { .. })
    }
}

/// Classifies `x_new` against the window and admits it when not anomalous.
pub fn detect(w: &mut SlidingWindow, x_new: &[f64], cfg: &DetectorConfig) -> Result<Detection> {
    if let Some(m) = w.dim() {
        if x_new.len() != m {
            return Err(Error::shape("detector input", m, x_new.len()));
        }
    }
    let verdict = match window_stats(w) {
        None => Detection::Warmup,
        Some(stats) => match predictive_region(&stats, cfg.theta, cfg.sigma_floor).first_violation(x_new) {
            Some(feature) => Detection::Anomaly { feature },
            None => Detection::Normal,
        },
    };
    if !verdict.is_anomaly() {
        w.push(x_new.to_vec())?;
    }
    Ok(verdict)
}

/// A window plus its configuration, owned by one fleet member.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyDetector {
    cfg: DetectorConfig,
    window: SlidingWindow,
}

impl AnomalyDetector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(AnomalyDetector {
            cfg,
            window: SlidingWindow::new(cfg.window),
        })
    }

    /// Starts from an already populated window.
    pub fn with_window(cfg: DetectorConfig, window: SlidingWindow) -> Result<Self> {
        cfg.validate()?;
        if window.capacity() != cfg.window {
            return Err(Error::shape("detector window capacity", cfg.window, window.capacity()));
        }
        Ok(AnomalyDetector { cfg, window })
    }

    pub fn observe(&mut self, x: &[f64]) -> Result<Detection> {
        detect(&mut self.window, x, &self.cfg)
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_window(values: impl IntoIterator<Item = f64>, k: usize) -> SlidingWindow {
        SlidingWindow::from_entries(k, values.into_iter().map(|v| vec![v])).unwrap()
    }

    fn cfg(theta: f64, floor: f64) -> DetectorConfig {
        DetectorConfig {
            window: 10,
            theta,
            sigma_floor: floor,
        }
    }

    #[test]
    fn stats_of_one_to_ten() {
        let w = scalar_window((1..=10).map(f64::from), 10);
        let s = window_stats(&w).unwrap();
        assert!((s.mean[0] - 5.5).abs() < 1e-12);
        assert!((s.std[0] - 2.872_281_323_269_014_8).abs() < 1e-12);
    }

    #[test]
    fn stats_of_constant_window() {
        let w = scalar_window(std::iter::repeat(5.0).take(10), 10);
        let s = window_stats(&w).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (5.0, 0.0));
    }

    #[test]
    fn stats_of_two_dim_window() {
        let w = SlidingWindow::from_entries(2, [vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let s = window_stats(&w).unwrap();
        assert_eq!(s.mean, vec![1.0, 2.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
    }

    #[test]
    fn underfilled_window_has_no_stats() {
        let w = scalar_window([1.0, 2.0], 10);
        assert!(window_stats(&w).is_none());
    }

    #[test]
    fn region_for_operating_point() {
        let w = scalar_window((1..=10).map(f64::from), 10);
        let r = predictive_region(&window_stats(&w).unwrap(), 3.0, 0.0);
        assert!((r.lower[0] - -3.116_843_969_807_044).abs() < 1e-9);
        assert!((r.upper[0] - 14.116_843_969_807_044).abs() < 1e-9);
    }

    #[test]
    fn collapsed_region() {
        let stats = WindowStats {
            mean: vec![4.0],
            std: vec![0.0],
        };
        let r = predictive_region(&stats, 3.0, 0.0);
        assert_eq!((r.lower[0], r.upper[0]), (4.0, 4.0));
    }

    #[test]
    fn detect_inside_and_outside() {
        let mut w = scalar_window((1..=10).map(f64::from), 10);
        assert_eq!(detect(&mut w, &[5.0], &cfg(3.0, 0.0)).unwrap(), Detection::Normal);
        let mut w = scalar_window((1..=10).map(f64::from), 10);
        let before = w.clone();
        assert_eq!(
            detect(&mut w, &[20.0], &cfg(3.0, 0.0)).unwrap(),
            Detection::Anomaly { feature: 0 }
        );
        assert_eq!(w, before, "anomalies must not enter the window");
    }

    #[test]
    fn detect_on_constant_window() {
        let mut w = scalar_window(std::iter::repeat(5.0).take(10), 10);
        assert_eq!(detect(&mut w, &[5.0], &cfg(3.0, 0.0)).unwrap(), Detection::Normal);
        assert!(detect(&mut w, &[5.000001], &cfg(3.0, 0.0)).unwrap().is_anomaly());
    }

    #[test]
    fn warmup_admits_everything() {
        let mut d = AnomalyDetector::new(cfg(3.0, 0.0)).unwrap();
        for i in 0..10 {
            assert_eq!(d.observe(&[(i * i) as f64]).unwrap(), Detection::Warmup);
        }
        assert!(d.window().is_full());
        assert!(d.observe(&[1e6]).unwrap().is_anomaly());
    }

    #[test]
    fn window_evicts_oldest() {
        let mut w = scalar_window((1..=10).map(f64::from), 10);
        detect(&mut w, &[5.0], &cfg(3.0, 0.0)).unwrap();
        let first: Vec<f64> = w.entries().map(|e| e[0]).collect();
        assert_eq!(first[0], 2.0);
        assert_eq!(*first.last().unwrap(), 5.0);
        assert_eq!(w.len(), 10);
    }

    #[test]
    fn reports_violating_feature() {
        let entries = (0..10).map(|i| vec![i as f64, (i % 2) as f64]);
        let mut w = SlidingWindow::from_entries(10, entries).unwrap();
        assert_eq!(
            detect(&mut w, &[4.0, 9.0], &cfg(3.0, 1e-9)).unwrap(),
            Detection::Anomaly { feature: 1 }
        );
    }

    #[test]
    fn dimension_mismatch() {
        let mut w = scalar_window((1..=10).map(f64::from), 10);
        assert!(matches!(detect(&mut w, &[1.0, 2.0], &cfg(3.0, 0.0)), Err(Error::Shape { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(AnomalyDetector::new(DetectorConfig { window: 1, ..Default::default() }).is_err());
        assert!(AnomalyDetector::new(DetectorConfig { theta: 0.0, ..Default::default() }).is_err());
        assert!(AnomalyDetector::new(DetectorConfig::default()).is_ok());
    }
}
