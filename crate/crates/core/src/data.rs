//! Dataset ingestion, lag features, bound fitting and feature scaling.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::Bounds;

/// `v ↦ (v − offset) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
}

impl AffineMap {
    pub fn identity() -> Self {
        AffineMap { offset: 0.0, scale: 1.0 }
    }

    /// Zero mean, unit standard deviation; constant columns get scale 1.
    pub fn standardizing(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count();
        if n == 0 {
            return Self::identity();
        }
        let mean = values.clone().sum::<f64>() / n as f64;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        AffineMap {
            offset: mean,
            scale: if sd > 0.0 && sd.is_finite() { sd } else { 1.0 },
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.offset) / self.scale
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.scale + self.offset
    }
}

/// Which CSV columns to read and which lags of the targets to append as
/// features.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvSpec {
    #[serde(default)]
    pub feature_columns: Vec<String>,
    pub target_columns: Vec<String>,
    #[serde(default)]
    pub lag_windows: Vec<usize>,
}

impl CsvSpec {
    /// Names of the assembled feature vector.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = self.feature_columns.clone();
        for lag in &self.lag_windows {
            for t in &self.target_columns {
                names.push(format!("{t}_lag{lag}"));
            }
        }
        names
    }
}

/// One row: features `x` and targets `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Rows assembled from a CSV, before bounds are attached.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    /// Rows lost to missing cells or to lagging.
    pub dropped_rows: usize,
}

impl Table {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.features
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| Observation {
                x: x.clone(),
                y: y.clone(),
            })
            .collect()
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| Error::Parse {
            row,
            column: column.to_string(),
            value: s.to_string(),
        })
}

/// Parses a headed CSV. Empty, `NA` or `NaN` cells count as missing and
/// drop their row; anything else that is not a finite number is a parse
/// error. Row numbers in errors are 1-based data rows.
pub fn read_table<R: Read>(reader: R, spec: &CsvSpec) -> Result<Table> {
    if spec.target_columns.is_empty() {
        return Err(Error::Contract("no target columns given".into()));
    }
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: HashMap<String, usize> = csv
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let locate = |names: &[String]| -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| header.get(n).copied().ok_or_else(|| Error::MissingColumn(n.clone())))
            .collect()
    };
    let feature_idx = locate(&spec.feature_columns)?;
    let target_idx = locate(&spec.target_columns)?;

    let mut raw_features: Vec<Vec<Option<f64>>> = Vec::new();
    let mut raw_targets: Vec<Vec<Option<f64>>> = Vec::new();
    for (r, record) in csv.records().enumerate() {
        let record = record?;
        let cell = |i: usize, name: &str| parse_cell(record.get(i).unwrap_or(""), r + 1, name);
        raw_features.push(
            feature_idx
                .iter()
                .zip(&spec.feature_columns)
                .map(|(&i, n)| cell(i, n))
                .collect::<Result<_>>()?,
        );
        raw_targets.push(
            target_idx
                .iter()
                .zip(&spec.target_columns)
                .map(|(&i, n)| cell(i, n))
                .collect::<Result<_>>()?,
        );
    }

    let max_lag = spec.lag_windows.iter().copied().max().unwrap_or(0);
    let rows = raw_targets.len();
    let mut table = Table {
        feature_names: spec.feature_names(),
        features: Vec::new(),
        targets: Vec::new(),
        dropped_rows: 0,
    };
    for r in 0..rows {
        let assembled = (|| {
            if r < max_lag {
                return None;
            }
            let mut x: Vec<f64> = raw_features[r].iter().copied().collect::<Option<_>>()?;
            for &lag in &spec.lag_windows {
                for v in &raw_targets[r - lag] {
                    x.push((*v)?);
                }
            }
            let y: Vec<f64> = raw_targets[r].iter().copied().collect::<Option<_>>()?;
            Some((x, y))
        })();
        match assembled {
            Some((x, y)) => {
                table.features.push(x);
                table.targets.push(y);
            }
            None => table.dropped_rows += 1,
        }
    }
    if table.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if table.dropped_rows > 0 {
        log::info!("dropped {} rows with missing or unlaggable values", table.dropped_rows);
    }
    Ok(table)
}

/// `[min − margin·range, max + margin·range]` per target column.
pub fn fit_bounds(targets: &[Vec<f64>], margin: f64) -> Result<Vec<Bounds>> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::Contract(format!("bound margin {margin} must be >= 0")));
    }
    let first = targets.first().ok_or(Error::EmptyDataset)?;
    (0..first.len())
        .map(|d| {
            let (lo, hi) = targets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| {
                (lo.min(row[d]), hi.max(row[d]))
            });
            let range = hi - lo;
            if !(range > 0.0) {
                return Err(Error::DegenerateDimension(d));
            }
            Bounds::new(lo - margin * range, hi + margin * range)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    features: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    bounds: Vec<Bounds>,
    feature_scaling: Vec<AffineMap>,
    dropped_rows: usize,
}

impl Dataset {
    /// Checks shapes and that every target lies within `bounds`; feature
    /// scaling is fitted on all rows.
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, bounds: Vec<Bounds>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != targets.len() {
            return Err(Error::Dimension {
                expected: targets.len(),
                got: features.len(),
            });
        }
        let dim = bounds.len();
        let f = features[0].len();
        for (i, (x, y)) in features.iter().zip(&targets).enumerate() {
            if y.len() != dim {
                return Err(Error::Dimension { expected: dim, got: y.len() });
            }
            if x.len() != f {
                return Err(Error::Dimension { expected: f, got: x.len() });
            }
            if let Some(d) = (0..dim).find(|&d| !bounds[d].contains(y[d])) {
                return Err(Error::Contract(format!(
                    "row {i}: target {} = {} is outside [{}, {}]",
                    d + 1,
                    y[d],
                    bounds[d].lower,
                    bounds[d].upper
                )));
            }
        }
        let feature_scaling = (0..f)
            .map(|j| AffineMap::standardizing(features.iter().map(move |x| x[j])))
            .collect();
        Ok(Dataset {
            feature_names: (1..=f).map(|j| format!("x{j}")).collect(),
            features,
            targets,
            bounds,
            feature_scaling,
            dropped_rows: 0,
        })
    }

    /// Targets only, for unconditional density estimation.
    pub fn unconditional(targets: Vec<Vec<f64>>, bounds: Vec<Bounds>) -> Result<Self> {
        let features = vec![Vec::new(); targets.len()];
        Self::new(features, targets, bounds)
    }

    pub fn from_table(table: Table, margin: f64) -> Result<Self> {
        let bounds = fit_bounds(&table.targets, margin)?;
        let mut ds = Self::new(table.features, table.targets, bounds)?;
        ds.feature_names = table.feature_names;
        ds.dropped_rows = table.dropped_rows;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_scaling.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn bounds(&self) -> &[Bounds] {
        &self.bounds
    }

    pub fn feature_scaling(&self) -> &[AffineMap] {
        &self.feature_scaling
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// Rows with raw (unscaled) features.
    pub fn observations(&self) -> Vec<Observation> {
        self.features
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| Observation {
                x: x.clone(),
                y: y.clone(),
            })
            .collect()
    }
}

/// Reads `path` and fits bounds with the given margin.
pub fn load_csv(path: impl AsRef<Path>, spec: &CsvSpec, margin: f64) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(Error::file(path))?;
    Dataset::from_table(read_table(file, spec)?, margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn spec(features: &[&str], targets: &[&str], lags: &[usize]) -> CsvSpec {
        CsvSpec {
            feature_columns: features.iter().map(|s| s.to_string()).collect(),
            target_columns: targets.iter().map(|s| s.to_string()).collect(),
            lag_windows: lags.to_vec(),
        }
    }

    #[test]
    fn one_lag_loses_one_row() {
        let csv = "t,a,b\n1,0.1,0.2\n2,0.3,0.4\n3,0.5,0.6\n";
        let table = read_table(csv.as_bytes(), &spec(&["t"], &["a", "b"], &[1])).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.dropped_rows, 1);
        assert_eq!(table.features[0], vec![2.0, 0.1, 0.2]);
        assert_eq!(table.targets[1], vec![0.5, 0.6]);
        assert_eq!(table.feature_names, vec!["t", "a_lag1", "b_lag1"]);
    }

    #[test]
    fn no_lags_keeps_feature_columns_exactly() {
        let csv = "f1,f2,y1,y2\n1,2,3,4\n5,6,7,8\n";
        let table = read_table(csv.as_bytes(), &spec(&["f2", "f1"], &["y1", "y2"], &[])).unwrap();
        assert_eq!(table.features, vec![vec![2.0, 1.0], vec![6.0, 5.0]]);
    }

    #[test]
    fn missing_cells_drop_rows() {
        let csv = "f,y1,y2\n1,0.1,0.2\n2,,0.4\nNA,0.5,0.6\n4,0.7,0.8\n";
        let table = read_table(csv.as_bytes(), &spec(&["f"], &["y1", "y2"], &[])).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.dropped_rows, 2);
    }

    #[test]
    fn non_numeric_target_names_row_and_column() {
        let csv = "f,y1,y2\n1,0.1,0.2\n2,abc,0.4\n";
        match read_table(csv.as_bytes(), &spec(&["f"], &["y1", "y2"], &[])) {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "y1");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn distinct_errors() {
        let csv = "f,y1\n1,0.1\n";
        assert!(matches!(
            read_table(csv.as_bytes(), &spec(&["f"], &["y1", "y9"], &[])),
            Err(Error::MissingColumn(c)) if c == "y9"
        ));
        let csv = "f,y1\n1,\n";
        assert!(matches!(
            read_table(csv.as_bytes(), &spec(&["f"], &["y1"], &[])),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn bounds_with_and_without_margin() {
        let t = vec![vec![0.0], vec![1.0], vec![0.4]];
        let b = fit_bounds(&t, 0.05).unwrap();
        assert!((b[0].lower + 0.05).abs() < 1e-15 && (b[0].upper - 1.05).abs() < 1e-15);
        let b = fit_bounds(&t, 0.0).unwrap();
        assert_eq!((b[0].lower, b[0].upper), (0.0, 1.0));
        assert!(matches!(
            fit_bounds(&[vec![1.0, 2.0], vec![1.0, 3.0]], 0.1),
            Err(Error::DegenerateDimension(0))
        ));
    }

    #[test]
    fn dataset_rejects_targets_outside_bounds() {
        let b = vec![Bounds::unit(), Bounds::unit()];
        assert!(Dataset::unconditional(vec![vec![0.5, 1.2]], b.clone()).is_err());
        assert!(Dataset::unconditional(vec![vec![0.5, 1.0]], b).is_ok());
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x,y1,y2\n1,0,5\n2,1,6\n3,0.5,7\n").unwrap();
        let ds = load_csv(&path, &spec(&["x"], &["y1", "y2"], &[]), 0.1).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.feature_dim(), 1);
        for y in ds.targets() {
            for (v, b) in y.iter().zip(ds.bounds()) {
                assert!(*v > b.lower && *v < b.upper);
            }
        }
        assert!(load_csv(dir.path().join("missing.csv"), &spec(&[], &["y1"], &[]), 0.1).is_err());
    }

    proptest! {
        #[test]
        fn scaling_round_trips(values in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
            let m = AffineMap::standardizing(values.iter().copied());
            for &v in &values {
                prop_assert!((m.invert(m.apply(v)) - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }
}
