//! LIBSVM sparse text format reader.
//!
//! Each line is `label idx:val idx:val ...` with 1-based, strictly increasing
//! feature indices. Labels -1/+1 map to 0/1 (a raw 0 or 1 passes through);
//! anything else is rejected. Indices are 0-based in memory.

use crate::error::{Error, Result};
use nalgebra::DVector;
use std::fs;
use std::path::Path;

/// Sparse binary-classification dataset held in memory.
#[derive(Debug, Clone)]
pub struct LibsvmDataset {
    d: usize,
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
}

impl LibsvmDataset {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.d
    }

    /// Label in {0, 1}.
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Sparse row as (0-based index, value) pairs in increasing index order.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// x_i^T w without densifying the row.
    pub fn sparse_dot(&self, i: usize, w: &DVector<f64>) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * w[j]).sum()
    }

    /// Largest row 2-norm; bounds the per-component data-fit gradient scale.
    pub fn max_row_norm(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Override the feature dimension. The file only reveals the largest
    /// index actually used, so a dataset may be declared wider than that;
    /// narrower is rejected.
    pub fn with_dim(mut self, d: usize) -> Result<Self> {
        if d < self.d {
            return Err(Error::param(
                "d",
                format!("dimension {d} is below the largest feature index {}", self.d),
            ));
        }
        self.d = d;
        Ok(self)
    }
}

/// Parse a LIBSVM sparse text file from disk.
pub fn parse_libsvm(path: impl AsRef<Path>) -> Result<LibsvmDataset> {
    let content = fs::read_to_string(path)?;
    parse_libsvm_str(&content)
}

/// Parse LIBSVM sparse text from a string. Blank lines are skipped; a file
/// with no data rows is an error.
pub fn parse_libsvm_str(content: &str) -> Result<LibsvmDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut d = 0usize;
    for (idx, raw) in content.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label = parse_label(label_tok, lineno)?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (idx_str, val_str) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected idx:val, got {tok:?}")))?;
            let one_based: usize = idx_str
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature index {idx_str:?}")))?;
            if one_based == 0 {
                return Err(parse_err(lineno, "feature indices are 1-based".into()));
            }
            let val: f64 = val_str
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature value {val_str:?}")))?;
            let j = one_based - 1;
            if let Some(&(prev, _)) = row.last() {
                if j <= prev {
                    return Err(parse_err(
                        lineno,
                        format!(
                            "feature indices must be strictly increasing ({} after {})",
                            one_based,
                            prev + 1
                        ),
                    ));
                }
            }
            d = d.max(one_based);
            row.push((j, val));
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::param("content", "empty dataset"));
    }
    Ok(LibsvmDataset { d, rows, labels })
}

fn parse_label(tok: &str, lineno: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(lineno, format!("bad label {tok:?}")))?;
    if v == -1.0 || v == 0.0 {
        Ok(0.0)
    } else if v == 1.0 {
        Ok(1.0)
    } else {
        Err(parse_err(lineno, format!("label {v} is not in {{-1, 0, +1}}")))
    }
}

fn parse_err(line: usize, reason: String) -> Error {
    Error::Parse { line, reason }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line_single_feature() {
        let data = parse_libsvm_str("+1 3:0.5").unwrap();
        assert_eq!(data.n_rows(), 1);
        assert_eq!(data.n_features(), 3);
        assert_eq!(data.label(0), 1.0);
        assert_eq!(data.row(0), &[(2, 0.5)]);
    }

    #[test]
    fn labels_map_to_zero_one() {
        let data = parse_libsvm_str("-1 1:2 4:1\n+1 2:-0.25\n0 1:1\n1 1:1").unwrap();
        assert_eq!(data.n_rows(), 4);
        assert_eq!(data.n_features(), 4);
        assert_eq!(data.label(0), 0.0);
        assert_eq!(data.label(1), 1.0);
        assert_eq!(data.label(2), 0.0);
        assert_eq!(data.label(3), 1.0);
    }

    #[test]
    fn sparse_dot_matches_hand_value() {
        let data = parse_libsvm_str("-1 1:2 4:1\n+1 2:-0.25").unwrap();
        let w = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        // row 0: 2*1 + 1*4 = 6; row 1: -0.25*2 = -0.5
        assert_eq!(data.sparse_dot(0, &w), 6.0);
        assert_eq!(data.sparse_dot(1, &w), -0.5);
    }

    #[test]
    fn max_row_norm_hand_value() {
        let data = parse_libsvm_str("+1 1:3 2:4\n-1 1:1").unwrap();
        assert_eq!(data.max_row_norm(), 5.0);
    }

    #[test]
    fn blank_lines_skipped() {
        let data = parse_libsvm_str("\n+1 1:1\n\n-1 2:1\n").unwrap();
        assert_eq!(data.n_rows(), 2);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(parse_libsvm_str("").is_err());
        assert!(parse_libsvm_str("\n\n").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_libsvm_str("+1 1:1\n+1 3:1 2:1").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        match parse_libsvm_str("+1 1:1\n\n+2 1:1").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(parse_libsvm_str("+1 2:1 2:3").is_err()); // repeated index
        assert!(parse_libsvm_str("+1 0:1").is_err()); // 0 is not a valid 1-based index
        assert!(parse_libsvm_str("+1 a:b").is_err());
        assert!(parse_libsvm_str("+1 3").is_err());
        assert!(parse_libsvm_str("abc 1:1").is_err());
        assert!(parse_libsvm_str("0.5 1:1").is_err()); // label outside {-1, 0, +1}
    }

    #[test]
    fn rows_without_features_allowed() {
        // All-zero rows are legal in the format.
        let data = parse_libsvm_str("+1\n-1 2:1").unwrap();
        assert_eq!(data.n_rows(), 2);
        assert_eq!(data.row(0), &[] as &[(usize, f64)]);
        assert_eq!(data.sparse_dot(0, &DVector::from_vec(vec![1.0, 1.0])), 0.0);
    }

    #[test]
    fn with_dim_widens_but_never_narrows() {
        let data = parse_libsvm_str("+1 3:0.5").unwrap();
        let wide = data.clone().with_dim(300).unwrap();
        assert_eq!(wide.n_features(), 300);
        assert!(data.with_dim(2).is_err());
    }

    #[test]
    fn w1a_shape_when_available() {
        let Some(path) = crate::oracle::find_data_file("w1a") else {
            eprintln!("w1a dataset not found (set ZONCF_DATA_DIR); skipping");
            return;
        };
        let data = parse_libsvm(path).unwrap();
        assert_eq!(data.n_rows(), 2477);
        assert_eq!(data.n_features(), 300);
    }
}
