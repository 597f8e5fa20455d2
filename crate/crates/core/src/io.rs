//! Model, instance and solution-vector file formats.
//!
//! Model JSON: `{"K": 2, "D": 3, "biases": [..K], "weights": [[..D]; K]}`.
//! CSV pair: a weights file of K lines with D values each, and a biases file
//! with one line of K values. Instances are one line of D comma-separated
//! values or a JSON array.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SoftmaxModel;
use crate::scalar::Scalar;
use crate::solver::fmt17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFormat {
    Json,
    CsvPair,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(rename = "K")]
    classes: usize,
    #[serde(rename = "D")]
    dim: usize,
    biases: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

fn cast<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

pub fn read_model_json<T: Scalar, R: Read>(source: R) -> Result<SoftmaxModel<T>> {
    let file: ModelFile = serde_json::from_reader(source)?;
    if file.weights.len() != file.classes || file.biases.len() != file.classes {
        return Err(Error::DimensionMismatch(format!(
            "K={} but {} weight rows and {} biases",
            file.classes,
            file.weights.len(),
            file.biases.len()
        )));
    }
    if let Some((i, row)) = file.weights.iter().enumerate().find(|(_, r)| r.len() != file.dim) {
        return Err(Error::DimensionMismatch(format!("D={} but weight row {i} has {} entries", file.dim, row.len())));
    }
    let rows: Vec<Vec<T>> = file.weights.iter().map(|r| cast(r)).collect();
    SoftmaxModel::from_rows(&rows, cast(&file.biases))
}

pub fn write_model_json<T: Scalar, W: Write>(model: &SoftmaxModel<T>, out: W) -> Result<()> {
    let file = ModelFile {
        classes: model.classes(),
        dim: model.dim(),
        biases: model.biases().iter().map(|b| b.to_f64_lossy()).collect(),
        weights: model
            .weights()
            .iter_rows()
            .map(|r| r.iter().map(|v| v.to_f64_lossy()).collect())
            .collect(),
    };
    serde_json::to_writer(out, &file)?;
    Ok(())
}

fn csv_rows<R: Read>(source: R) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {f:?}: {e}", line + 1))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_model_csv<T: Scalar, R1: Read, R2: Read>(weights: R1, biases: R2) -> Result<SoftmaxModel<T>> {
    let w = csv_rows(weights)?;
    let b = csv_rows(biases)?;
    if b.len() != 1 {
        return Err(Error::Parse(format!("biases file must hold one line, found {}", b.len())));
    }
    if w.is_empty() {
        return Err(Error::Parse("weights file is empty".into()));
    }
    let rows: Vec<Vec<T>> = w.iter().map(|r| cast(r)).collect();
    SoftmaxModel::from_rows(&rows, cast(&b[0]))
}

pub fn write_model_csv<T: Scalar, W1: Write, W2: Write>(model: &SoftmaxModel<T>, weights: W1, biases: W2) -> Result<()> {
    let mut w = csv::Writer::from_writer(weights);
    for row in model.weights().iter_rows() {
        w.write_record(row.iter().map(|&v| fmt17(v.to_f64_lossy())))?;
    }
    w.flush()?;
    let mut b = csv::Writer::from_writer(biases);
    b.write_record(model.biases().iter().map(|&v| fmt17(v.to_f64_lossy())))?;
    b.flush()?;
    Ok(())
}

pub fn load_model<T: Scalar, R: Read>(source: R, format: ModelFormat, biases: Option<R>) -> Result<SoftmaxModel<T>> {
    match (format, biases) {
        (ModelFormat::Json, _) => read_model_json(source),
        (ModelFormat::CsvPair, Some(b)) => read_model_csv(source, b),
        (ModelFormat::CsvPair, None) => Err(Error::InvalidConfig("CSV models need a biases file".into())),
    }
}

/// JSON for `.json` paths, otherwise a CSV pair with the given biases file.
pub fn load_model_path<T: Scalar>(path: &Path, biases: Option<&Path>) -> Result<SoftmaxModel<T>> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let open = |p: &Path| std::fs::File::open(p).map(std::io::BufReader::new);
    if is_json && biases.is_none() {
        return read_model_json(open(path)?);
    }
    match biases {
        Some(b) => read_model_csv(open(path)?, open(b)?),
        None => Err(Error::InvalidConfig(format!("{} is not JSON; pass a biases file for CSV models", path.display()))),
    }
}

/// A JSON array or a single CSV line.
pub fn parse_instance<T: Scalar>(text: &str) -> Result<Vec<T>> {
    let trimmed = text.trim();
    let values: Vec<f64> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed)?
    } else {
        let rows = csv_rows(trimmed.as_bytes())?;
        match rows.len() {
            1 => rows.into_iter().next().unwrap_or_default(),
            n => return Err(Error::Parse(format!("instance must be one line, found {n}"))),
        }
    };
    if values.is_empty() {
        return Err(Error::Parse("instance is empty".into()));
    }
    Ok(cast(&values))
}

pub fn load_instance<T: Scalar>(path: &Path) -> Result<Vec<T>> {
    parse_instance(&std::fs::read_to_string(path)?)
}

/// Every instance file in a directory, in file-name order.
pub fn load_instance_dir<T: Scalar>(dir: &Path) -> Result<Vec<Vec<T>>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.is_file());
    paths.sort();
    paths.iter().map(|p| load_instance(p)).collect()
}

/// One line, comma separated, 17 significant digits.
pub fn write_vector<T: Scalar, W: Write>(mut out: W, v: &[T]) -> Result<()> {
    let line = v.iter().map(|&x| fmt17(x.to_f64_lossy())).collect::<Vec<_>>().join(",");
    writeln!(out, "{line}")?;
    Ok(())
}
