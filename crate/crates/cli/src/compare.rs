//! Queries-to-target comparison across trace files.

use std::fmt::Write as _;
use std::path::Path;

use crate::runner::CSV_HEADER;

pub enum CompareError {
    Schema(String),
    Io(String),
}

/// Result per trace: the smallest cumulative query count at which the
/// reported loss reaches the target, if it ever does.
pub struct Reach {
    pub path: String,
    pub queries: Option<u64>,
}

pub fn queries_to_target(path: &Path, target: f64) -> Result<Reach, CompareError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CompareError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(CompareError::Schema(format!(
                "{}: expected header {CSV_HEADER:?}, found {other:?}",
                path.display()
            )))
        }
    }
    let mut reached: Option<u64> = None;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CompareError::Schema(format!(
                "{} line {}: expected 6 fields, found {}",
                path.display(),
                i + 2,
                fields.len()
            )));
        }
        if fields[2].is_empty() {
            continue;
        }
        let queries: u64 = fields[1].parse().map_err(|_| {
            CompareError::Schema(format!("{} line {}: bad queries field", path.display(), i + 2))
        })?;
        let phi: f64 = fields[2].parse().map_err(|_| {
            CompareError::Schema(format!("{} line {}: bad phi field", path.display(), i + 2))
        })?;
        if phi <= target {
            reached = Some(reached.map_or(queries, |q| q.min(queries)));
            break;
        }
    }
    Ok(Reach {
        path: path.display().to_string(),
        queries: reached,
    })
}

pub fn render_table(results: &[Reach]) -> String {
    let mut out = String::from("algorithm,queries_to_target\n");
    for r in results {
        match r.queries {
            Some(q) => {
                let _ = writeln!(out, "{},{}", r.path, q);
            }
            None => {
                let _ = writeln!(out, "{},not reached", r.path);
            }
        }
    }
    out
}
