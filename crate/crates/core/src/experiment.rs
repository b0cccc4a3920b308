//! Reproducible experiment runs driven by a TOML manifest.
//!
//! Every output directory receives `manifest.toml`, the fully resolved
//! manifest that produced it; running again from that file reproduces the
//! outputs byte for byte. Files are written to a temporary name and renamed
//! into place, so an interrupted run never leaves a truncated artifact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arx::{select_order, LinearModel, OrderSelection, OrderSelectionConfig};
use crate::data::{
    fit_normalizer, generate_synthetic_fleet, load_trip_csv, split_train_test, write_trip_csv, CsvSchema,
    SyntheticFleetConfig, TripDataset,
};
use crate::error::{Error, Result};
use crate::federation::{
    detection_csv, evaluate, metrics_csv, models_csv, run_strategy, sharing_csv, EvaluationTable,
    FederationConfig, RunOutput, Strategy,
};
use crate::metrics::{summary_table, ComparisonReport, ConvergenceSpec, StrategySummary, AVERAGE_COLUMN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Every `*.csv` in `dir`, in file-name order.
    Csv { dir: PathBuf, schema: CsvSchema },
    Synthetic(SyntheticFleetConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            n_train: 4000,
            n_test: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    /// Single source of randomness; overrides any seed nested below.
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub strategies: Vec<Strategy>,
    /// Strategy the reductions are computed for.
    #[serde(default = "default_reference")]
    pub reference: Strategy,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitSpec,
    /// Standardize each member's inputs with statistics of its own training
    /// split. The intercept column is left as is.
    #[serde(default = "default_true")]
    pub normalize: bool,
    pub federation: FederationConfig,
    #[serde(default)]
    pub convergence: ConvergenceSpec,
    /// When set, the ARX order is chosen on the first member's training split
    /// and replaces `federation.order`.
    #[serde(default)]
    pub order_selection: Option<OrderSelectionConfig>,
}

fn default_reference() -> Strategy {
    Strategy::Efl
}

fn default_true() -> bool {
    true
}

impl ExperimentManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut m: ExperimentManifest =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid manifest: {e}")))?;
        m.propagate_seed();
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))
    }

    /// Copies the top-level seed into the nested configs.
    pub fn propagate_seed(&mut self) {
        self.federation.seed = self.seed;
        if let DataSource::Synthetic(cfg) = &mut self.data {
            cfg.seed = self.seed;
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.propagate_seed();
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("manifest lists no strategies".into()));
        }
        if self.split.n_train == 0 {
            return Err(Error::Config("split.n_train must be at least 1".into()));
        }
        if let DataSource::Synthetic(cfg) = &self.data {
            cfg.validate()?;
        }
        self.federation.validate()?;
        self.convergence.validate()
    }
}

/// Per-member train and test trips, preprocessed as the manifest asks.
#[derive(Debug, Clone)]
pub struct PreparedFleet {
    pub train: Vec<TripDataset>,
    pub test: Vec<TripDataset>,
    /// Generating parameters per member, for synthetic sources.
    pub true_params: Option<Vec<Vec<f64>>>,
}

impl PreparedFleet {
    pub fn trip_ids(&self) -> Vec<String> {
        self.train.iter().map(|t| t.trip_id.clone()).collect()
    }
}

fn load_raw_fleet(data: &DataSource) -> Result<(Vec<TripDataset>, Option<Vec<Vec<f64>>>)> {
    match data {
        DataSource::Synthetic(cfg) => {
            let members = generate_synthetic_fleet(cfg)?;
            let params = members.iter().map(|m| m.true_params.clone()).collect();
            Ok((members.into_iter().map(|m| m.dataset).collect(), Some(params)))
        }
        DataSource::Csv { dir, schema } => {
            let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
            let mut paths = Vec::new();
            for entry in entries {
                let path = entry.map_err(|e| Error::io(dir, e))?.path();
                if path.extension().is_some_and(|ext| ext == "csv") {
                    paths.push(path);
                }
            }
            paths.sort();
            if paths.is_empty() {
                return Err(Error::EmptyDataset(format!("no CSV files in {}", dir.display())));
            }
            let fleet = paths.iter().map(|p| load_trip_csv(p, schema)).collect::<Result<_>>()?;
            Ok((fleet, None))
        }
    }
}

/// Loads, splits and (optionally) normalizes the fleet.
pub fn prepare_fleet(manifest: &ExperimentManifest) -> Result<PreparedFleet> {
    let (fleet, true_params) = load_raw_fleet(&manifest.data)?;
    let mut train = Vec::with_capacity(fleet.len());
    let mut test = Vec::with_capacity(fleet.len());
    for trip in &fleet {
        let (tr, te) = split_train_test(trip, manifest.split.n_train, manifest.split.n_test)?;
        if manifest.normalize {
            let mut stats = fit_normalizer(&tr)?;
            if let Some(c) = tr.constant_index() {
                stats = stats.with_passthrough(c);
            }
            train.push(stats.apply(&tr)?);
            test.push(stats.apply(&te)?);
        } else {
            train.push(tr);
            test.push(te);
        }
    }
    Ok(PreparedFleet {
        train,
        test,
        true_params,
    })
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_manifest_copy(manifest: &ExperimentManifest) -> Result<()> {
    write_atomic(manifest.output_dir.join("manifest.toml"), manifest.to_toml()?.as_bytes())
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    trip_id: &'a str,
    population: Option<&'a str>,
    true_params: &'a [f64],
    anomaly_mask: Option<&'a [bool]>,
}

/// Writes one CSV per synthetic member under `fleet/` plus
/// `ground_truth.json` (generating parameters and anomaly masks).
pub fn synth(manifest: &ExperimentManifest) -> Result<Vec<PathBuf>> {
    manifest.validate()?;
    let DataSource::Synthetic(cfg) = &manifest.data else {
        return Err(Error::Config("synth needs a synthetic data source".into()));
    };
    let members = generate_synthetic_fleet(cfg)?;
    let dir = manifest.output_dir.join("fleet");
    let mut written = Vec::with_capacity(members.len());
    for m in &members {
        let path = dir.join(format!("{}.csv", m.dataset.trip_id));
        let tmp = dir.join(format!("{}.csv.partial", m.dataset.trip_id));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_trip_csv(&m.dataset, "SoC", &tmp)?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let truth: Vec<GroundTruth> = members
        .iter()
        .map(|m| GroundTruth {
            trip_id: &m.dataset.trip_id,
            population: m.dataset.population_tag.as_deref(),
            true_params: &m.true_params,
            anomaly_mask: m.dataset.anomaly_mask.as_deref(),
        })
        .collect();
    let json = serde_json::to_string_pretty(&truth).map_err(|e| Error::Report(e.to_string()))?;
    write_atomic(manifest.output_dir.join("ground_truth.json"), json.as_bytes())?;
    write_manifest_copy(manifest)?;
    Ok(written)
}

/// Applies order selection if configured and returns the federation config
/// to train with.
fn resolve_federation(manifest: &ExperimentManifest, fleet: &PreparedFleet) -> Result<(FederationConfig, Option<OrderSelection>)> {
    let mut cfg = manifest.federation.clone();
    let selection = match &manifest.order_selection {
        Some(sel) => {
            let first = fleet
                .train
                .first()
                .ok_or_else(|| Error::EmptyDataset("fleet has no members".into()))?;
            let s = select_order(first, sel)?;
            log::info!("selected ARX order n_a={} n_b={}", s.chosen.n_a, s.chosen.n_b);
            cfg.order = s.chosen;
            Some(s)
        }
        None => None,
    };
    Ok((cfg, selection))
}

fn strategy_dir(manifest: &ExperimentManifest, s: Strategy) -> PathBuf {
    manifest.output_dir.join(s.label())
}

fn write_run(manifest: &ExperimentManifest, run: &RunOutput) -> Result<()> {
    let dir = strategy_dir(manifest, run.strategy);
    write_atomic(dir.join("metrics.csv"), metrics_csv(&run.rounds).as_bytes())?;
    write_atomic(dir.join("sharing.csv"), sharing_csv(&run.sharing).as_bytes())?;
    write_atomic(dir.join("models.csv"), models_csv(&run.trip_ids, &run.models).as_bytes())?;
    if run.strategy.uses_detector() {
        write_atomic(dir.join("detection.csv"), detection_csv(&run.rounds).as_bytes())?;
    }
    Ok(())
}

pub struct TrainOutcome {
    pub runs: Vec<RunOutput>,
    pub order_selection: Option<OrderSelection>,
}

fn train_all(manifest: &ExperimentManifest, fleet: &PreparedFleet) -> Result<TrainOutcome> {
    let (cfg, order_selection) = resolve_federation(manifest, fleet)?;
    let mut runs = Vec::with_capacity(manifest.strategies.len());
    for &s in &manifest.strategies {
        log::info!("training {s} on {} members for {} iterations", fleet.train.len(), cfg.budget);
        runs.push(run_strategy(&fleet.train, &cfg.with_strategy(s))?);
    }
    Ok(TrainOutcome { runs, order_selection })
}

fn write_training(manifest: &ExperimentManifest, out: &TrainOutcome) -> Result<()> {
    for run in &out.runs {
        write_run(manifest, run)?;
    }
    if let Some(sel) = &out.order_selection {
        write_atomic(manifest.output_dir.join("order_fit.csv"), sel.to_csv().as_bytes())?;
    }
    write_manifest_copy(manifest)
}

/// Trains every listed strategy and writes per-strategy logs and model dumps.
pub fn train(manifest: &ExperimentManifest) -> Result<TrainOutcome> {
    manifest.validate()?;
    let fleet = prepare_fleet(manifest)?;
    let out = train_all(manifest, &fleet)?;
    write_training(manifest, &out)?;
    Ok(out)
}

/// Parses a dump written by [`models_csv`].
pub fn read_models_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<LinearModel>)> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let mut ids = Vec::new();
    let mut models = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut fields = rec.iter();
        let id = fields.next().unwrap_or_default().to_string();
        let params = fields
            .enumerate()
            .map(|(j, v)| {
                v.trim().parse::<f64>().map_err(|_| Error::Parse {
                    row: row + 1,
                    column: format!("w{j}"),
                    value: v.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ids.push(id);
        models.push(LinearModel::new(params)?);
    }
    Ok((ids, models))
}

/// Evaluation CSV with one row per strategy, Table-IV style.
pub fn evaluation_csv(trip_ids: &[String], rows: &[(Strategy, EvaluationTable)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method".to_string()];
    header.extend(trip_ids.iter().cloned());
    header.push(AVERAGE_COLUMN.to_string());
    w.write_record(&header).expect("in-memory write");
    for (s, table) in rows {
        let mut rec = vec![s.label().to_string()];
        rec.extend(table.sqrt_mse.iter().map(|v| v.to_string()));
        rec.push(table.average.to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Loads the model dumps written by [`train`] and scores them on the test
/// split.
pub fn evaluate_saved(manifest: &ExperimentManifest) -> Result<Vec<(Strategy, EvaluationTable)>> {
    manifest.validate()?;
    let fleet = prepare_fleet(manifest)?;
    let (cfg, _) = resolve_federation(manifest, &fleet)?;
    let n = cfg.members.unwrap_or(fleet.test.len()).min(fleet.test.len());
    let test = &fleet.test[..n];
    let mut rows = Vec::with_capacity(manifest.strategies.len());
    for &s in &manifest.strategies {
        let path = strategy_dir(manifest, s).join("models.csv");
        if !path.exists() {
            return Err(Error::Config(format!(
                "no trained models for {s} at {}; run `train` first",
                path.display()
            )));
        }
        let (ids, models) = read_models_csv(&path)?;
        if let Some((have, want)) = ids.iter().zip(test).map(|(a, b)| (a, &b.trip_id)).find(|(a, b)| a != b) {
            return Err(Error::Report(format!("model dump lists member `{have}` where the fleet has `{want}`")));
        }
        rows.push((s, evaluate(&models, test, cfg.order)?));
    }
    let ids: Vec<String> = test.iter().map(|t| t.trip_id.clone()).collect();
    write_atomic(manifest.output_dir.join("evaluation.csv"), evaluation_csv(&ids, &rows).as_bytes())?;
    write_manifest_copy(manifest)?;
    Ok(rows)
}

pub struct ComparisonOutcome {
    pub runs: Vec<RunOutput>,
    pub evaluations: Vec<EvaluationTable>,
    pub report: ComparisonReport,
    pub fleet: PreparedFleet,
}

/// Trains and evaluates every strategy in memory and builds the comparison
/// report; writes nothing.
pub fn run_comparison(manifest: &ExperimentManifest) -> Result<ComparisonOutcome> {
    manifest.validate()?;
    let fleet = prepare_fleet(manifest)?;
    let trained = train_all(manifest, &fleet)?;
    let order = resolve_federation(manifest, &fleet)?.0.order;
    let mut evaluations = Vec::with_capacity(trained.runs.len());
    let mut summaries = Vec::with_capacity(trained.runs.len());
    for run in &trained.runs {
        let n = run.models.len();
        let eval = evaluate(&run.models, &fleet.test[..n], order)?;
        summaries.push(StrategySummary {
            strategy: run.strategy.label().to_string(),
            train_sqrt_mse: run.metrics.final_sqrt_mse()?,
            convergence: run
                .metrics
                .convergence(&manifest.convergence)?
                .into_iter()
                .map(|c| c.map(|k| k as f64))
                .collect(),
            horizon: run.metrics.iterations() as f64,
            test_sqrt_mse: Some(eval.sqrt_mse.clone()),
        });
        evaluations.push(eval);
    }
    let ids = trained.runs.first().map(|r| r.trip_ids.clone()).unwrap_or_default();
    let report = summary_table(&ids, &summaries, manifest.reference.label())?;
    Ok(ComparisonOutcome {
        runs: trained.runs,
        evaluations,
        report,
        fleet,
    })
}

/// [`run_comparison`] plus all artifacts: per-strategy logs, the comparison
/// table (CSV and text) and the evaluation table.
pub fn compare(manifest: &ExperimentManifest) -> Result<ComparisonOutcome> {
    let out = run_comparison(manifest)?;
    for run in &out.runs {
        write_run(manifest, run)?;
    }
    let dir = &manifest.output_dir;
    write_atomic(dir.join("comparison.csv"), out.report.to_csv().as_bytes())?;
    write_atomic(dir.join("comparison.txt"), out.report.to_text().as_bytes())?;
    let rows: Vec<(Strategy, EvaluationTable)> =
        out.runs.iter().map(|r| r.strategy).zip(out.evaluations.iter().cloned()).collect();
    let ids = out.report.member_ids.clone();
    write_atomic(dir.join("evaluation.csv"), evaluation_csv(&ids, &rows).as_bytes())?;
    write_manifest_copy(manifest)?;
    Ok(out)
}
