//! Accuracy and convergence criteria plus the cross-strategy comparison
//! report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sqrt(mean(e^2))`.
pub fn sqrt_mse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::DegenerateSeries("sqrt MSE of an empty series".into()));
    }
    Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

/// Cumulative sqrt MSE after each sample.
pub fn running_sqrt_mse(errors: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    errors
        .iter()
        .enumerate()
        .map(|(i, e)| {
            acc += e * e;
            (acc / (i + 1) as f64).sqrt()
        })
        .collect()
}

/// Per-member prediction errors and running sqrt MSE, one entry per
/// iteration actually run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsSeries {
    pub errors: Vec<Vec<f64>>,
    pub running: Vec<Vec<f64>>,
    sums: Vec<f64>,
}

impl MetricsSeries {
    pub fn new(n_members: usize) -> Self {
        MetricsSeries {
            errors: vec![Vec::new(); n_members],
            running: vec![Vec::new(); n_members],
            sums: vec![0.0; n_members],
        }
    }

    /// Records one error and returns the updated running sqrt MSE.
    pub fn push(&mut self, member: usize, error: f64) -> f64 {
        self.sums[member] += error * error;
        self.errors[member].push(error);
        let r = (self.sums[member] / self.errors[member].len() as f64).sqrt();
        self.running[member].push(r);
        r
    }

    pub fn n_members(&self) -> usize {
        self.errors.len()
    }

    pub fn iterations(&self) -> usize {
        self.errors.first().map(Vec::len).unwrap_or(0)
    }

    pub fn final_sqrt_mse(&self) -> Result<Vec<f64>> {
        self.errors.iter().map(|e| sqrt_mse(e)).collect()
    }

    pub fn convergence(&self, spec: &ConvergenceSpec) -> Result<Vec<Option<usize>>> {
        self.running
            .iter()
            .map(|r| convergence_iteration(r, spec))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    /// Window length `W`.
    pub window: usize,
    /// Relative tolerance around the final value.
    pub tolerance: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            window: 50,
            tolerance: 0.05,
        }
    }
}

impl ConvergenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "convergence spec needs W >= 1 and tolerance > 0, got W={} tolerance={}",
                self.window, self.tolerance
            )));
        }
        Ok(())
    }
}

/// Smallest 1-based iteration `k` such that every value in `[k, k + W)` lies
/// within `tolerance` (relative) of the series' last value.
pub fn convergence_iteration(series: &[f64], spec: &ConvergenceSpec) -> Result<Option<usize>> {
    spec.validate()?;
    if spec.window > series.len() {
        return Err(Error::Config(format!(
            "convergence window {} longer than series ({})",
            spec.window,
            series.len()
        )));
    }
    let last = *series.last().expect("non-empty");
    let band = spec.tolerance * last.abs();
    let ok: Vec<bool> = series.iter().map(|v| (v - last).abs() <= band).collect();
    // run[i] = number of consecutive in-band values starting at i
    let mut run = 0usize;
    let mut first = None;
    for i in (0..series.len()).rev() {
        run = if ok[i] { run + 1 } else { 0 };
        if run >= spec.window {
            first = Some(i + 1);
        }
    }
    Ok(first)
}

/// `(baseline - candidate) / baseline * 100`.
pub fn reduction_percent(baseline: f64, candidate: f64) -> f64 {
    (baseline - candidate) / baseline * 100.0
}

/// Results of one strategy on one fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub strategy: String,
    pub train_sqrt_mse: Vec<f64>,
    /// `I_C` per member; fractional values allow feeding averaged results.
    pub convergence: Vec<Option<f64>>,
    /// Iterations run; stands in for `I_C` of members that never converged.
    pub horizon: f64,
    pub test_sqrt_mse: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub strategy: String,
    pub train_sqrt_mse: Vec<f64>,
    pub train_avg: f64,
    pub convergence: Vec<f64>,
    pub convergence_avg: f64,
    pub test_sqrt_mse: Option<Vec<f64>>,
    pub test_avg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub baseline: String,
    pub sqrt_mse_pct: f64,
    pub convergence_pct: f64,
    pub test_sqrt_mse_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub member_ids: Vec<String>,
    pub reference: String,
    pub rows: Vec<ReportRow>,
    pub reductions: Vec<Reduction>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Builds the per-member/per-strategy table with row averages and the
/// percentage reductions of `reference` against every other strategy, all
/// computed on the averaged values.
pub fn summary_table(
    member_ids: &[String],
    results: &[StrategySummary],
    reference: &str,
) -> Result<ComparisonReport> {
    let n = member_ids.len();
    if n == 0 {
        return Err(Error::Report("no members".into()));
    }
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let check = |len: usize, what: &str| {
            if len != n {
                Err(Error::Report(format!(
                    "strategy {} reports {what} for {len} members, expected {n}",
                    r.strategy
                )))
            } else {
                Ok(())
            }
        };
        check(r.train_sqrt_mse.len(), "sqrt MSE")?;
        check(r.convergence.len(), "I_C")?;
        if let Some(t) = &r.test_sqrt_mse {
            check(t.len(), "test sqrt MSE")?;
        }
        let convergence: Vec<f64> = r
            .convergence
            .iter()
            .map(|c| c.unwrap_or(r.horizon))
            .collect();
        rows.push(ReportRow {
            strategy: r.strategy.clone(),
            train_avg: mean(&r.train_sqrt_mse),
            train_sqrt_mse: r.train_sqrt_mse.clone(),
            convergence_avg: mean(&convergence),
            convergence,
            test_avg: r.test_sqrt_mse.as_deref().map(mean),
            test_sqrt_mse: r.test_sqrt_mse.clone(),
        });
    }
    let reductions = match rows.iter().find(|r| r.strategy == reference) {
        None => Vec::new(),
        Some(re) => rows
            .iter()
            .filter(|r| r.strategy != reference)
            .map(|b| Reduction {
                baseline: b.strategy.clone(),
                sqrt_mse_pct: reduction_percent(b.train_avg, re.train_avg),
                convergence_pct: reduction_percent(b.convergence_avg, re.convergence_avg),
                test_sqrt_mse_pct: match (b.test_avg, re.test_avg) {
                    (Some(b), Some(e)) => Some(reduction_percent(b, e)),
                    _ => None,
                },
            })
            .collect(),
    };
    Ok(ComparisonReport {
        member_ids: member_ids.to_vec(),
        reference: reference.to_string(),
        rows,
        reductions,
    })
}

pub const AVERAGE_COLUMN: &str = "averaged result";

impl ComparisonReport {
    pub fn row(&self, strategy: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }

    pub fn reduction(&self, baseline: &str) -> Option<&Reduction> {
        self.reductions.iter().find(|r| r.baseline == baseline)
    }

    /// Rows of (method, criteria, per-member values, average).
    fn lines(&self) -> Vec<(String, String, Vec<String>, String)> {
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>();
        let mut out = Vec::new();
        for r in &self.rows {
            out.push((r.strategy.clone(), "sqrt MSE".into(), fmt(&r.train_sqrt_mse), format!("{:.4}", r.train_avg)));
            out.push((r.strategy.clone(), "I_C".into(), fmt(&r.convergence), format!("{:.2}", r.convergence_avg)));
            if let (Some(t), Some(avg)) = (&r.test_sqrt_mse, r.test_avg) {
                out.push((r.strategy.clone(), "test sqrt MSE".into(), fmt(t), format!("{avg:.4}")));
            }
        }
        let blank = vec![String::new(); self.member_ids.len()];
        for red in &self.reductions {
            let method = format!("{} vs {}", self.reference, red.baseline);
            out.push((method.clone(), "sqrt MSE reduction %".into(), blank.clone(), format!("{:.1}", red.sqrt_mse_pct)));
            out.push((method.clone(), "I_C reduction %".into(), blank.clone(), format!("{:.1}", red.convergence_pct)));
            if let Some(p) = red.test_sqrt_mse_pct {
                out.push((method, "test sqrt MSE reduction %".into(), blank.clone(), format!("{p:.1}")));
            }
        }
        out
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["method".to_string(), "criteria".to_string()];
        h.extend(self.member_ids.iter().cloned());
        h.push(AVERAGE_COLUMN.to_string());
        h
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for (method, criteria, values, avg) in self.lines() {
            let mut rec = vec![method, criteria];
            rec.extend(values);
            rec.push(avg);
            w.write_record(rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_text(&self) -> String {
        let mut table = vec![self.header()];
        for (method, criteria, values, avg) in self.lines() {
            let mut rec = vec![method, criteria];
            rec.extend(values);
            rec.push(avg);
            table.push(rec);
        }
        let cols = table[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &table {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| if i < 2 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}
