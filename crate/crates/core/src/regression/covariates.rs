use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};

/// One subject's clinical record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subject {
    pub id: String,
    /// Years.
    pub age: f64,
    /// Beck depression inventory, 0 to 63.
    pub bdi: f64,
    /// Intracranial volume, arbitrary positive units.
    pub icv: f64,
    /// PTSD symptom scale, 0 to 42.
    pub pss: f64,
    /// Childhood trauma questionnaire total, 25 to 125.
    pub ctqtot: f64,
    /// Binary diagnosis label.
    pub label: u8,
}

/// How declared ranges are enforced on ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    /// Out-of-range values are errors.
    #[default]
    Strict,
    /// Out-of-range values are logged and kept.
    Lenient,
}

/// Response variables modeled by the regression suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    Pss,
    Ctqtot,
}

impl Response {
    pub fn name(self) -> &'static str {
        match self {
            Response::Pss => "pss",
            Response::Ctqtot => "ctqtot",
        }
    }
}

const AGE_RANGE: (f64, f64) = (0.0, 120.0);
const BDI_RANGE: (f64, f64) = (0.0, 63.0);
const PSS_RANGE: (f64, f64) = (0.0, 42.0);
const CTQ_RANGE: (f64, f64) = (25.0, 125.0);

/// Validated per-subject covariates, in subject order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateTable {
    rows: Vec<Subject>,
}

impl CovariateTable {
    pub fn new(rows: Vec<Subject>, strictness: Strictness) -> Result<Self> {
        for (r, s) in rows.iter().enumerate() {
            check_subject(r, s, strictness)?;
        }
        Ok(Self { rows })
    }

    /// Read a CSV with a header naming `id, age, bdi, icv, pss, ctqtot, label`
    /// (any column order).
    pub fn from_csv(path: impl AsRef<Path>, strictness: Strictness) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ShapeError::io(path, e))?;
        Self::from_csv_str(&text, strictness).map_err(|e| match e {
            ShapeError::Parse { message, .. } => ShapeError::parse(path, message),
            other => other,
        })
    }

    pub fn from_csv_str(text: &str, strictness: Strictness) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let rows = reader
            .deserialize::<Subject>()
            .enumerate()
            .map(|(r, row)| {
                row.map_err(|e| ShapeError::parse("<covariates>", format!("row {}: {e}", r + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, strictness)
    }

    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        for row in &self.rows {
            w.serialize(row).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| ShapeError::io(path, e))
    }

    pub fn rows(&self) -> &[Subject] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn age(&self) -> Vec<f64> {
        self.rows.iter().map(|s| s.age).collect()
    }

    pub fn bdi(&self) -> Vec<f64> {
        self.rows.iter().map(|s| s.bdi).collect()
    }

    pub fn icv(&self) -> Vec<f64> {
        self.rows.iter().map(|s| s.icv).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|s| s.label).collect()
    }

    pub fn response(&self, r: Response) -> Vec<f64> {
        self.rows
            .iter()
            .map(|s| match r {
                Response::Pss => s.pss,
                Response::Ctqtot => s.ctqtot,
            })
            .collect()
    }
}

fn csv_io(path: &Path, e: csv::Error) -> ShapeError {
    ShapeError::io(path, std::io::Error::other(e))
}

fn check_subject(row: usize, s: &Subject, strictness: Strictness) -> Result<()> {
    let fields = [
        ("age", s.age, AGE_RANGE),
        ("bdi", s.bdi, BDI_RANGE),
        ("pss", s.pss, PSS_RANGE),
        ("ctqtot", s.ctqtot, CTQ_RANGE),
        ("icv", s.icv, (f64::MIN_POSITIVE, f64::INFINITY)),
    ];
    for (name, value, (lo, hi)) in fields {
        if !value.is_finite() {
            return Err(ShapeError::OutOfRange(format!(
                "subject {} (row {}): {name} is not finite",
                s.id,
                row + 1
            )));
        }
        if value < lo || value > hi {
            let msg = format!(
                "subject {} (row {}): {name} = {value} outside [{lo}, {hi}]",
                s.id,
                row + 1
            );
            match strictness {
                Strictness::Strict => return Err(ShapeError::OutOfRange(msg)),
                Strictness::Lenient => log::warn!("{msg}"),
            }
        }
    }
    if s.label > 1 {
        return Err(ShapeError::OutOfRange(format!(
            "subject {} (row {}): label {} is not 0 or 1",
            s.id,
            row + 1,
            s.label
        )));
    }
    Ok(())
}
