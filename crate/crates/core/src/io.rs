//! Measure files and geodesic frame export.
//!
//! JSON: `{"dim": d, "points": [[...], ...], "weights": [...]}`.
//! CSV: header `x_1,...,x_d,w`, one atom per row. An empty file, or a CSV
//! with only a header, is the null measure.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::GeodesicSample;
use crate::measure::DiscreteMeasure;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl From<&DiscreteMeasure> for MeasureFile {
    fn from(mu: &DiscreteMeasure) -> Self {
        Self {
            dim: mu.dim(),
            points: mu.points().map(<[f64]>::to_vec).collect(),
            weights: mu.weights().to_vec(),
        }
    }
}

impl MeasureFile {
    pub fn into_measure(self) -> Result<DiscreteMeasure> {
        if let Some(p) = self.points.iter().find(|p| p.len() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        if self.points.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                points: self.points.len(),
                weights: self.weights.len(),
            });
        }
        let flat = self.points.into_iter().flatten().collect();
        DiscreteMeasure::from_flat(self.dim, flat, self.weights)
    }
}

pub fn measure_from_json(text: &str) -> Result<DiscreteMeasure> {
    if text.trim().is_empty() {
        return Ok(DiscreteMeasure::null(0));
    }
    serde_json::from_str::<MeasureFile>(text)?.into_measure()
}

pub fn measure_to_json(mu: &DiscreteMeasure) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MeasureFile::from(mu))?)
}

pub fn measure_from_csv(text: &str) -> Result<DiscreteMeasure> {
    if text.trim().is_empty() {
        return Ok(DiscreteMeasure::null(0));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let cols = headers.len();
    if cols == 0 || headers.get(cols - 1) != Some("w") {
        return Err(Error::Parse("CSV header must end with a `w` column".into()));
    }
    let dim = cols - 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let mut values = Vec::with_capacity(cols);
        for field in record.iter() {
            values.push(field.parse::<f64>().map_err(|e| {
                Error::Parse(format!("row {}: `{field}`: {e}", row + 1))
            })?);
        }
        weights.push(values.pop().expect("csv checks the field count"));
        points.extend(values);
    }
    DiscreteMeasure::from_flat(dim, points, weights)
}

pub fn measure_to_csv(mu: &DiscreteMeasure) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=mu.dim()).map(|k| format!("x_{k}")).collect();
    header.push("w".into());
    w.write_record(&header)?;
    for (x, m) in mu.points().zip(mu.weights()) {
        let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
        row.push(m.to_string());
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a measure, choosing CSV for a `.csv` extension and JSON otherwise.
pub fn read_measure(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if is_csv(path) {
        measure_from_csv(&text)
    } else {
        measure_from_json(&text)
    }
}

pub fn write_measure(path: impl AsRef<Path>, mu: &DiscreteMeasure) -> Result<()> {
    let path = path.as_ref();
    let text = if is_csv(path) {
        measure_to_csv(mu)?
    } else {
        measure_to_json(mu)?
    };
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicFrame {
    pub t: f64,
    pub mass: f64,
    pub lambda: f64,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl From<&GeodesicSample> for GeodesicFrame {
    fn from(s: &GeodesicSample) -> Self {
        Self {
            t: s.t,
            mass: s.mass,
            lambda: s.lambda,
            points: s.measure.points().map(<[f64]>::to_vec).collect(),
            weights: s.measure.weights().to_vec(),
        }
    }
}

pub fn frames_to_json(samples: &[GeodesicSample]) -> Result<String> {
    let frames: Vec<GeodesicFrame> = samples.iter().map(GeodesicFrame::from).collect();
    Ok(serde_json::to_string_pretty(&frames)?)
}
