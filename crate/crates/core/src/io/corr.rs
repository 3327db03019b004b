//! Correspondence CSV files: one matched pixel pair per row, current-frame
//! coordinates first, with the exact header `x_t,y_t,x_prev,y_prev`.

use std::path::Path;

use nalgebra::Vector2;

use super::{atomic_write, IoError};
use crate::fitting::{Correspondence, CorrespondenceSet};

/// Required first line of a correspondence CSV.
pub const CORRESPONDENCE_HEADER: [&str; 4] = ["x_t", "y_t", "x_prev", "y_prev"];

/// Writes matched pairs as CSV. Floats print in shortest-round-trip form,
/// so loading reproduces them exactly.
pub fn save_correspondences(set: &CorrespondenceSet, path: &Path) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(CORRESPONDENCE_HEADER)
        .and_then(|()| {
            for c in set.pairs() {
                writer.write_record([
                    c.current.x.to_string(),
                    c.current.y.to_string(),
                    c.previous.x.to_string(),
                    c.previous.y.to_string(),
                ])?;
            }
            Ok(())
        })
        .map_err(|e| IoError::format(path, e.to_string()))?;
    let bytes = writer.into_inner().map_err(|e| IoError::format(path, e.to_string()))?;
    atomic_write(path, &bytes)
}

/// Parses a correspondence CSV, insisting on the exact expected header and
/// four finite floats per row. Errors name the 1-based line number (the
/// header is line 1).
pub fn load_correspondences(path: &Path) -> Result<CorrespondenceSet, IoError> {
    let content = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(content.as_bytes());
    let headers = reader.headers().map_err(|e| IoError::format(path, e.to_string()))?;
    if headers.iter().ne(CORRESPONDENCE_HEADER) {
        return Err(IoError::parse(
            path,
            1,
            format!(
                "expected header {}, got {:?}",
                CORRESPONDENCE_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut pairs = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line_no = idx + 2;
        let record = record.map_err(|e| IoError::parse(path, line_no, e.to_string()))?;
        if record.len() != 4 {
            return Err(IoError::parse(
                path,
                line_no,
                format!("expected 4 fields, found {}", record.len()),
            ));
        }
        let mut values = [0.0f64; 4];
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| IoError::parse(path, line_no, format!("invalid float {field:?}")))?;
            if !v.is_finite() {
                return Err(IoError::parse(path, line_no, format!("non-finite value {v}")));
            }
            values[i] = v;
        }
        pairs.push(Correspondence {
            current: Vector2::new(values[0], values[1]),
            previous: Vector2::new(values[2], values[3]),
        });
    }
    CorrespondenceSet::new(pairs).map_err(|e| IoError::format(path, e.to_string()))
}
