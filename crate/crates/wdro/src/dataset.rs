//! Dataset CSV: header `x0,...,x{n-1},label`, one sample per row.

use std::path::Path;

use wdro_core::LabeledSample;

use crate::error::{Error, Result};
use crate::fmt::fmt_f64;

pub fn write_dataset(data: &[LabeledSample]) -> Result<String> {
    let n = data.first().map_or(0, |s| s.x.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for s in data {
        let mut row: Vec<String> = s.x.iter().map(|&v| fmt_f64(v)).collect();
        row.push(s.label.to_string());
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<dataset>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Vec<LabeledSample>> {
    let err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    let cols = header.len();
    let expected: Vec<String> = (0..cols.saturating_sub(1))
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    if cols < 2 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(err(1, format!("header must be `{}`", expected.join(","))));
    }
    let mut data = Vec::new();
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut x = Vec::with_capacity(cols - 1);
        for field in record.iter().take(cols - 1) {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => x.push(v),
                _ => return Err(err(line, format!("`{field}` is not a finite number"))),
            }
        }
        let label = record[cols - 1]
            .parse::<usize>()
            .map_err(|_| err(line, format!("`{}` is not a class index", &record[cols - 1])))?;
        data.push(LabeledSample::new(x, label));
    }
    if data.is_empty() {
        return Err(err(1, "dataset has no rows".into()));
    }
    Ok(data)
}

pub fn load_dataset(path: &Path) -> Result<Vec<LabeledSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}
