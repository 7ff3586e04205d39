//! File formats. All indices are 0-based.
//!
//! * vector CSV: one value per line, optional non-numeric header line.
//! * dataset CSV: header `y,x0,…,x{p-1}`, one sample per row.
//! * trace CSV: `iter,objective,eta,support_size,step_norm,dist_to_ref`;
//!   the final row holds the returned iterate with `eta` and `step_norm`
//!   empty, and `dist_to_ref` is empty when no reference was given.
//!
//! Floats are written in Rust's shortest round-trip form.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::solver::SolverTrace;

pub fn parse_vector_csv(text: &str) -> Result<DVector<f64>> {
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let field = line.trim().trim_end_matches(',');
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => return Err(Error::NonFinite(format!("vector line {}: {v}", line_no + 1))),
            Err(_) if values.is_empty() && line_no == 0 => {} // header
            Err(_) => return Err(Error::Parse(format!("vector line {}: {field:?}", line_no + 1))),
        }
    }
    if values.is_empty() {
        return Err(Error::Parse("vector file holds no values".into()));
    }
    Ok(DVector::from_vec(values))
}

pub fn format_vector_csv(v: &DVector<f64>) -> String {
    let mut out = String::new();
    for x in v.iter() {
        let _ = writeln!(out, "{x:?}");
    }
    out
}

pub fn parse_dataset_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() < 2 || &header[0] != "y" {
        return Err(Error::Parse("dataset header must start with `y` followed by x0..x{p-1}".into()));
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("x{j}") {
            return Err(Error::Parse(format!("dataset column {} must be named x{j}, found {name:?}", j + 1)));
        }
    }
    let p = header.len() - 1;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != p + 1 {
            return Err(Error::Parse(format!("dataset row {} has {} fields, expected {}", row + 1, record.len(), p + 1)));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("dataset row {} field {}: {field:?}", row + 1, j)))?;
            if j == 0 {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    if ys.is_empty() {
        return Err(Error::Parse("dataset holds no rows".into()));
    }
    Dataset::new(DMatrix::from_row_slice(ys.len(), p, &xs), DVector::from_vec(ys))
}

pub fn format_dataset_csv(data: &Dataset) -> String {
    let mut out = String::from("y");
    for j in 0..data.p() {
        let _ = write!(out, ",x{j}");
    }
    out.push('\n');
    for i in 0..data.n() {
        let _ = write!(out, "{:?}", data.y()[i]);
        for j in 0..data.p() {
            let _ = write!(out, ",{:?}", data.x()[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn format_trace_csv(trace: &SolverTrace) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    let mut out = String::from("iter,objective,eta,support_size,step_norm,dist_to_ref\n");
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{},{:?},{}",
            r.iter,
            r.objective,
            r.eta,
            r.support.len(),
            r.step_norm,
            opt(r.dist_to_ref)
        );
    }
    let _ = writeln!(
        out,
        "{},{:?},,{},,{}",
        trace.iterations(),
        trace.final_objective,
        trace.final_support.len(),
        opt(trace.final_dist_to_ref)
    );
    out
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}
