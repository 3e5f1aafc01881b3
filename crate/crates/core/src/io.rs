//! Reading and writing measures as CSV (`x1,...,xd,w`) or JSON
//! (`{"dim", "points", "weights"}`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasureND;

/// Loaded weights may miss one by this much; they are then renormalised.
pub const LOAD_MASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format {other:?}, expected csv or json"))),
        }
    }
}

impl Format {
    /// Guesses the format from a file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

fn finish(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<DiscreteMeasureND> {
    let total: f64 = weights.iter().sum();
    if !((total - 1.0).abs() <= LOAD_MASS_TOL) {
        return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
    }
    DiscreteMeasureND::from_unnormalized(dim, points, weights)
}

pub fn measure_from_csv_str(text: &str) -> Result<DiscreteMeasureND> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let cols = header.len();
    if cols < 2 {
        return Err(Error::Parse("CSV header needs at least one coordinate and a weight column".into()));
    }
    for (k, name) in header.iter().enumerate() {
        let expected = if k + 1 == cols { "w".to_string() } else { format!("x{}", k + 1) };
        if name != expected {
            return Err(Error::Parse(format!("column {} is {name:?}, expected {expected:?}", k + 1)));
        }
    }
    let dim = cols - 1;
    let (mut points, mut weights) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {s:?}: {e}", line + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != cols {
            return Err(Error::Parse(format!("row {} has {} fields, expected {cols}", line + 1, vals.len())));
        }
        weights.push(vals[dim]);
        points.push(vals[..dim].to_vec());
    }
    finish(dim, points, weights)
}

pub fn measure_from_json_str(text: &str) -> Result<DiscreteMeasureND> {
    let m: MeasureJson = serde_json::from_str(text)?;
    finish(m.dim, m.points, m.weights)
}

pub fn measure_to_csv_string(m: &DiscreteMeasureND) -> String {
    let mut s = (1..=m.dim()).map(|k| format!("x{k},")).collect::<String>();
    s.push_str("w\n");
    for (p, w) in m.points().iter().zip(m.weights()) {
        for x in p {
            s.push_str(&format!("{x:.16e},"));
        }
        s.push_str(&format!("{w:.16e}\n"));
    }
    s
}

pub fn measure_to_json_string(m: &DiscreteMeasureND) -> String {
    let j = MeasureJson {
        dim: m.dim(),
        points: m.points().to_vec(),
        weights: m.weights().to_vec(),
    };
    serde_json::to_string_pretty(&j).expect("finite floats serialise")
}

/// Loads a measure, choosing the parser from the file extension.
pub fn load_measure(path: &Path) -> Result<DiscreteMeasureND> {
    let text = std::fs::read_to_string(path)?;
    match Format::from_path(path) {
        Format::Csv => measure_from_csv_str(&text),
        Format::Json => measure_from_json_str(&text),
    }
}

pub fn save_measure(path: &Path, m: &DiscreteMeasureND) -> Result<()> {
    let text = match Format::from_path(path) {
        Format::Csv => measure_to_csv_string(m),
        Format::Json => measure_to_json_string(m),
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let m = DiscreteMeasureND::new(2, vec![vec![0.1, -2.0], vec![1.0 / 3.0, 5.0]], vec![0.25, 0.75]).unwrap();
        let back = measure_from_csv_str(&measure_to_csv_string(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_round_trip() {
        let m = DiscreteMeasureND::new(1, vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(measure_from_json_str(&measure_to_json_string(&m)).unwrap(), m);
    }

    #[test]
    fn weights_are_renormalised_or_rejected() {
        let m = measure_from_csv_str("x1,w\n0,0.5\n1,0.5000001\n").unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(measure_from_csv_str("x1,w\n0,0.5\n1,0.6\n").is_err());
        assert!(measure_from_csv_str("y,w\n0,1\n").is_err());
        assert!(measure_from_csv_str("x1,w\n0,abc\n").is_err());
    }
}
