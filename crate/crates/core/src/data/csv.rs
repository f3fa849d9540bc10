//! CSV feature input: comma separated, `.` decimal point, optional header.
//!
//! The first record is treated as a header when any of its cells fails to
//! parse as a number; every later record must be fully numeric.

use std::path::Path;

use crate::data::format::{Dtype, FeatureFile};
use crate::error::{PlumeError, Result};
use crate::tensor::Matrix;

/// Which column carries the class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Last,
}

pub fn read_csv_features(path: impl AsRef<Path>, label_column: LabelColumn) -> Result<FeatureFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PlumeError::io(path, e))?;
    parse_csv_features(&text, label_column, path)
}

pub fn parse_csv_features(text: &str, label_column: LabelColumn, path: &Path) -> Result<FeatureFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let err = |line: usize, detail: String| PlumeError::Csv {
        path: path.to_path_buf(),
        line,
        detail,
    };

    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(index + 1, |p| p.line() as usize);
            err(line, e.to_string())
        })?;
        let line = record.position().map_or(index + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, String>> = record
            .iter()
            .map(|cell| cell.parse::<f64>().map_err(|_| cell.to_string()))
            .collect();
        if index == 0 && parsed.iter().any(|p| p.is_err()) {
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(err(line, format!("expected {expected} fields, found {}", record.len())));
        }
        let label_at = match label_column {
            LabelColumn::Last => expected.checked_sub(1).ok_or_else(|| err(line, "empty record".into()))?,
            LabelColumn::Index(i) if i < expected => i,
            LabelColumn::Index(i) => {
                return Err(err(line, format!("label column {i} out of range for {expected} fields")))
            }
        };
        for (c, cell) in parsed.into_iter().enumerate() {
            let v = cell.map_err(|bad| err(line, format!("non-numeric cell {bad:?} in column {c}")))?;
            if c == label_at {
                if v.fract() != 0.0 || v < i32::MIN as f64 || v > i32::MAX as f64 {
                    return Err(err(line, format!("label {v} is not a 32-bit integer")));
                }
                labels.push(v as i32);
            } else {
                values.push(v);
            }
        }
    }
    let dim = width.map_or(0, |w| w.saturating_sub(1));
    let features = Matrix::new(labels.len(), dim, values)?;
    FeatureFile::new(features, labels, Dtype::F64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, col: LabelColumn) -> Result<FeatureFile> {
        parse_csv_features(text, col, Path::new("t.csv"))
    }

    #[test]
    fn labels_are_extracted() {
        let f = parse("1.5,2,0\n3,4.25,1\n", LabelColumn::Last).unwrap();
        assert_eq!(f.features.shape(), (2, 2));
        assert_eq!(f.features.as_slice(), &[1.5, 2.0, 3.0, 4.25]);
        assert_eq!(f.labels, vec![0, 1]);

        let f = parse("a,b,label\n7,1.0,2.0\n", LabelColumn::Index(0)).unwrap();
        assert_eq!(f.labels, vec![7]);
        assert_eq!(f.features.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse("1,2,0\n3,4,5,1\n", LabelColumn::Last).unwrap_err();
        match err {
            PlumeError::Csv { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_after_header_is_an_error() {
        let err = parse("x,y,l\n1,oops,0\n", LabelColumn::Last).unwrap_err();
        assert!(matches!(err, PlumeError::Csv { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn scientific_notation_is_exact() {
        let f = parse("1e-3,2.5E+2,-7.125e0,3\n", LabelColumn::Last).unwrap();
        assert_eq!(f.features.as_slice(), &[1e-3, 2.5e2, -7.125]);
        assert_eq!(f.labels, vec![3]);
    }

    #[test]
    fn fractional_label_rejected() {
        assert!(parse("1,2,0.5\n", LabelColumn::Last).is_err());
    }
}
