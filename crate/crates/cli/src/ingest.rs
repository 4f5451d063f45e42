use std::io::Read;
use std::path::Path;

use lpa_core::local_model::{observed_delta, NoiseModel, Points};
use lpa_core::Dataset;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    /// `row` counts data rows from 1 (the header is row 0).
    #[error("row {row}, column '{column}': {reason}")]
    ParseError { row: usize, column: String, reason: String },
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invalid(String),
}

/// Parsed CSV columns before they become a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawData {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigma_true: Option<Vec<f64>>,
}

impl RawData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Builds the dataset; `delta` defaults to the observed variance-ratio bound.
    pub fn into_dataset(self, delta: Option<f64>) -> Result<Dataset, lpa_core::Error> {
        let points = Points::new(self.dim, self.coords)?;
        let delta = match (&self.sigma_true, delta) {
            (_, Some(d)) => d,
            (Some(st), None) => observed_delta(&self.sigma, st),
            (None, None) => 0.0,
        };
        let noise = NoiseModel::new(self.sigma, self.sigma_true, delta)?;
        Dataset::new(points, self.y, noise)
    }
}

pub fn ingest_csv(path: &Path) -> Result<RawData, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))?;
    ingest_reader(file)
}

/// Reads `x` (or `x1..xd`), `y`, `sigma` and optional `sigma_true` columns.
/// Lines starting with `#` are ignored.
pub fn ingest_reader<R: Read>(reader: R) -> Result<RawData, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| IngestError::Io(e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let x_cols: Vec<(String, usize)> = match find("x") {
        Some(i) => vec![("x".to_string(), i)],
        None => {
            let mut cols = Vec::new();
            for j in 1.. {
                let name = format!("x{j}");
                match find(&name) {
                    Some(i) => cols.push((name, i)),
                    None => break,
                }
            }
            if cols.is_empty() {
                return Err(IngestError::MissingColumn("x".into()));
            }
            cols
        }
    };
    let y_col = find("y").ok_or_else(|| IngestError::MissingColumn("y".into()))?;
    let s_col = find("sigma").ok_or_else(|| IngestError::MissingColumn("sigma".into()))?;
    let st_col = find("sigma_true");

    let mut data = RawData {
        dim: x_cols.len(),
        coords: Vec::new(),
        y: Vec::new(),
        sigma: Vec::new(),
        sigma_true: st_col.map(|_| Vec::new()),
    };
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| IngestError::ParseError {
            row,
            column: String::new(),
            reason: e.to_string(),
        })?;
        let field = |name: &str, col: usize| -> Result<f64, IngestError> {
            let raw = record.get(col).unwrap_or("");
            let err = |reason: String| IngestError::ParseError { row, column: name.to_string(), reason };
            let v: f64 = raw.parse().map_err(|_| err(format!("'{raw}' is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite value '{raw}'")));
            }
            Ok(v)
        };
        for (name, col) in &x_cols {
            data.coords.push(field(name, *col)?);
        }
        data.y.push(field("y", y_col)?);
        let s = field("sigma", s_col)?;
        if s <= 0.0 {
            return Err(IngestError::ParseError { row, column: "sigma".into(), reason: "must be positive".into() });
        }
        data.sigma.push(s);
        if let (Some(c), Some(st)) = (st_col, data.sigma_true.as_mut()) {
            let v = field("sigma_true", c)?;
            if v <= 0.0 {
                return Err(IngestError::ParseError {
                    row,
                    column: "sigma_true".into(),
                    reason: "must be positive".into(),
                });
            }
            st.push(v);
        }
    }
    if data.is_empty() {
        return Err(IngestError::Invalid("no data rows".into()));
    }
    Ok(data)
}
