//! CSV ingestion.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{RenetError, Result};
use crate::model::{validate_dataset, Dataset};

/// Reads a CSV with a header row. The response is `target_col`, or the last
/// column when `None`. Feature columns that do not parse as numbers become
/// categorical, coded by the sorted order of their distinct values.
pub fn read_csv(path: &Path, target_col: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (c, v) in cells.iter_mut().zip(rec.iter()) {
            c.push(v.trim().to_string());
        }
    }
    parse_columns(header, cells, target_col)
}

fn parse_numeric(col: &[String]) -> Option<Vec<f64>> {
    col.iter().map(|v| v.parse::<f64>().ok()).collect()
}

fn parse_columns(header: Vec<String>, cells: Vec<Vec<String>>, target_col: Option<&str>) -> Result<Dataset> {
    if header.len() < 2 {
        return Err(RenetError::InvalidArgument(
            "need at least one feature and a target column".into(),
        ));
    }
    let t = match target_col {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RenetError::InvalidArgument(format!("target column `{name}` not found")))?,
        None => header.len() - 1,
    };
    let n = cells[t].len();
    let y = parse_numeric(&cells[t])
        .ok_or_else(|| RenetError::InvalidArgument(format!("target column `{}` is not numeric", header[t])))?;

    let mut names = Vec::new();
    let mut mask = Vec::new();
    let mut levels = Vec::new();
    let mut columns = Vec::new();
    for (j, col) in cells.iter().enumerate() {
        if j == t {
            continue;
        }
        names.push(header[j].clone());
        match parse_numeric(col) {
            Some(v) => {
                mask.push(false);
                levels.push(Vec::new());
                columns.push(v);
            }
            None => {
                let lv: Vec<String> = col.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
                let codes = col
                    .iter()
                    .map(|v| lv.binary_search(v).expect("level present") as f64)
                    .collect();
                mask.push(true);
                levels.push(lv);
                columns.push(codes);
            }
        }
    }
    let p = columns.len();
    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    let mut d = Dataset::new(x, DVector::from_vec(y))
        .with_names(names)
        .with_categorical(mask);
    d.levels = levels;
    validate_dataset(d)
}
