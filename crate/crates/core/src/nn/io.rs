//! Tensor text files: one row per line, tab-separated, 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use super::tensor::Tensor;
use crate::{Error, Result};

/// Canonical real formatting used by every text artifact.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
}

pub fn tensor_to_tsv(t: &Tensor) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}\t{}", t.rows(), t.cols());
    for r in 0..t.rows() {
        let line: Vec<String> = t.row(r).iter().map(|&v| fmt_real(v)).collect();
        let _ = writeln!(out, "{}", line.join("\t"));
    }
    out
}

pub fn tensor_from_tsv(text: &str) -> std::result::Result<Tensor, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty tensor file")?;
    let (r, c) = header.split_once('\t').ok_or("bad tensor header")?;
    let rows: usize = r.trim().parse().map_err(|_| "bad row count")?;
    let cols: usize = c.trim().parse().map_err(|_| "bad column count")?;
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        if line.is_empty() && cols == 0 {
            continue;
        }
        let vals: Vec<f64> = line
            .split('\t')
            .map(parse_real)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", i + 2))?;
        if vals.len() != cols {
            return Err(format!("line {}: expected {cols} values, found {}", i + 2, vals.len()));
        }
        data.extend(vals);
    }
    Tensor::from_vec(rows, cols, data).map_err(|e| e.to_string())
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    std::fs::write(path, tensor_to_tsv(t)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    tensor_from_tsv(&text).map_err(|e| Error::Nn(format!("{}: {e}", path.display())))
}
