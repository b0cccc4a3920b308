use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TripDataset, TripRecord, CONSTANT_FEATURE};
use crate::error::{Error, Result};

/// Ordered input feature names plus the output column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub features: Vec<String>,
    #[serde(default = "default_target")]
    pub target: String,
}

fn default_target() -> String {
    "SoC".to_string()
}

impl CsvSchema {
    pub fn new<S: Into<String>>(features: impl IntoIterator<Item = S>, target: &str) -> Self {
        CsvSchema {
            features: features.into_iter().map(Into::into).collect(),
            target: target.to_string(),
        }
    }
}

/// Optional integer time-index column. Absent means `t` is the row number.
const TIME_COLUMN: &str = "t";

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })?;
    Ok(v)
}

/// Loads one trip. The trip id is the file stem. Extra columns are ignored;
/// a `constant` feature missing from the header is synthesized as 1.0.
pub fn load_trip_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TripDataset> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);

    // None = synthesized constant
    let mut feature_cols: Vec<Option<usize>> = Vec::with_capacity(schema.features.len());
    for name in &schema.features {
        match find(name) {
            Some(i) => feature_cols.push(Some(i)),
            None if name == CONSTANT_FEATURE => feature_cols.push(None),
            None => return Err(Error::MissingColumn(name.clone())),
        }
    }
    let target_col = find(&schema.target).ok_or_else(|| Error::MissingColumn(schema.target.clone()))?;
    let time_col = find(TIME_COLUMN);

    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        // 1-based data row, header excluded
        let row = row + 1;
        let rec = rec.map_err(csv_err)?;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let x = schema
            .features
            .iter()
            .zip(&feature_cols)
            .map(|(name, col)| match col {
                Some(i) => parse_cell(cell(*i), row, name),
                None => Ok(1.0),
            })
            .collect::<Result<Vec<f64>>>()?;
        let y = parse_cell(cell(target_col), row, &schema.target)?;
        let t = match time_col {
            Some(i) => cell(i).trim().parse::<usize>().map_err(|_| Error::Parse {
                row,
                column: TIME_COLUMN.to_string(),
                value: cell(i).to_string(),
            })?,
            None => row - 1,
        };
        records.push(TripRecord { t, x, y });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    let trip_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    TripDataset::new(trip_id, schema.features.clone(), records)
}

/// Serializes a trip as `t,<features...>,<target>`. Values are written in
/// shortest round-trip form, so reloading is exact.
pub fn write_trip_csv(ds: &TripDataset, target: &str, path: impl AsRef<Path>) -> Result<()> {
    let bytes = trip_csv_bytes(ds, target)?;
    std::fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
}

pub(crate) fn trip_csv_bytes(ds: &TripDataset, target: &str) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_csv = |source| Error::Csv {
        path: ds.trip_id.clone().into(),
        source,
    };
    let mut header = vec![TIME_COLUMN.to_string()];
    header.extend(ds.feature_names.iter().cloned());
    header.push(target.to_string());
    w.write_record(&header).map_err(to_csv)?;
    for r in &ds.records {
        let mut row = Vec::with_capacity(r.x.len() + 2);
        row.push(r.t.to_string());
        row.extend(r.x.iter().map(|v| v.to_string()));
        row.push(r.y.to_string());
        w.write_record(&row).map_err(to_csv)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(ds.trip_id.clone(), e.into_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = std::fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn maps_columns_and_synthesizes_constant() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "trip01.csv", "velocity,SoC\n10,90\n20.5,89.5\n0,89\n");
        let schema = CsvSchema::new(["constant", "velocity"], "SoC");
        let ds = load_trip_csv(&p, &schema).unwrap();
        assert_eq!(ds.trip_id, "trip01");
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records[0].x, vec![1.0, 10.0]);
        assert_eq!(ds.records[1].x, vec![1.0, 20.5]);
        assert_eq!(ds.records[2].y, 89.0);
        assert_eq!(ds.records[2].t, 2);
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.csv", "speed,SoC\n1,2\n");
        let schema = CsvSchema::new(["constant", "velocity"], "SoC");
        match load_trip_csv(&p, &schema) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "velocity"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.csv", "velocity,SoC\n1,2\nfast,3\n");
        let schema = CsvSchema::new(["velocity"], "SoC");
        match load_trip_csv(&p, &schema) {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "velocity", "fast"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.csv", "velocity,SoC\n");
        let schema = CsvSchema::new(["velocity"], "SoC");
        assert!(matches!(load_trip_csv(&p, &schema), Err(Error::EmptyDataset(_))));
        let p = write_tmp(&dir, "b.csv", "");
        assert!(load_trip_csv(&p, &schema).is_err());
    }

    #[test]
    fn write_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let records = (0..5)
            .map(|t| TripRecord {
                t: t + 7,
                x: vec![1.0, 0.1 * t as f64, std::f64::consts::PI / (t as f64 + 1.0)],
                y: 1.0 / 3.0 + t as f64,
            })
            .collect();
        let names = vec!["constant".into(), "a".into(), "b".into()];
        let ds = TripDataset::new("trip", names, records).unwrap();
        let p = dir.path().join("trip.csv");
        write_trip_csv(&ds, "SoC", &p).unwrap();
        let back = load_trip_csv(&p, &CsvSchema::new(["constant", "a", "b"], "SoC")).unwrap();
        assert_eq!(back, ds);
    }
}
