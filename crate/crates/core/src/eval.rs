//! Agreement between automated per-slice vessel counts and a reference
//! (phantom ground truth or a human-annotation CSV).
//!
//! The reference CSV shape is `slice,count` with LF endings; phantom
//! ground-truth exports and automated counts use the same format, so any
//! pair can be compared.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// How closely two count sequences agree. The success number is pegged to
/// the exact-match rate; the mean absolute error is reported alongside so
/// near-miss readings stay checkable.
#[derive(Clone, Debug, PartialEq)]
pub struct AgreementReport {
    pub n_slices: usize,
    pub exact_match_rate: f64,
    pub mean_abs_error: f64,
    /// auto - reference, per slice.
    pub per_slice_diff: Vec<i64>,
}

impl AgreementReport {
    /// Single-line JSON with rates at six decimals; key order fixed.
    pub fn to_json_line(&self) -> String {
        let diffs: Vec<String> = self.per_slice_diff.iter().map(|d| d.to_string()).collect();
        format!(
            "{{\"n_slices\":{},\"exact_match_rate\":{:.6},\"mean_abs_error\":{:.6},\"per_slice_diff\":[{}]}}",
            self.n_slices,
            self.exact_match_rate,
            self.mean_abs_error,
            diffs.join(",")
        )
    }
}

/// Compare automated counts against a reference of the same length.
pub fn compare_counts(auto: &[u32], reference: &[u32]) -> Result<AgreementReport> {
    if auto.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput);
    }
    if auto.len() != reference.len() {
        return Err(Error::CountLengthMismatch {
            auto: auto.len(),
            reference: reference.len(),
        });
    }
    let per_slice_diff: Vec<i64> = auto
        .iter()
        .zip(reference)
        .map(|(&a, &r)| a as i64 - r as i64)
        .collect();
    let n = per_slice_diff.len();
    let exact = per_slice_diff.iter().filter(|&&d| d == 0).count();
    let abs_sum: i64 = per_slice_diff.iter().map(|d| d.abs()).sum();
    Ok(AgreementReport {
        n_slices: n,
        exact_match_rate: exact as f64 / n as f64,
        mean_abs_error: abs_sum as f64 / n as f64,
        per_slice_diff,
    })
}

/// Write counts as `slice,count` CSV, LF endings, byte-deterministic.
pub fn write_counts_csv(counts: &[u32], path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(8 * counts.len() + 16);
    writeln!(out, "slice,count").expect("vec write");
    for (k, c) in counts.iter().enumerate() {
        writeln!(out, "{k},{c}").expect("vec write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a `slice,count` CSV. Rows must be contiguous slice indices
/// starting at 0.
pub fn read_counts_csv(path: &Path) -> Result<Vec<u32>> {
    let parse_err = |reason: String| Error::Parse {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("slice,count") {
        return Err(parse_err("expected header 'slice,count'".into()));
    }
    let mut counts = Vec::new();
    for (i, line) in lines.enumerate() {
        let Some((slice, count)) = line.split_once(',') else {
            return Err(parse_err(format!("row {i}: expected 'slice,count', got '{line}'")));
        };
        let slice: usize = slice
            .parse()
            .map_err(|_| parse_err(format!("row {i}: bad slice index '{slice}'")))?;
        if slice != i {
            return Err(parse_err(format!("row {i}: non-contiguous slice index {slice}")));
        }
        counts.push(
            count
                .parse()
                .map_err(|_| parse_err(format!("row {i}: bad count '{count}'")))?,
        );
    }
    if counts.is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    Ok(counts)
}
