//! Dense dataset container and svmlight/libsvm sparse text ingestion.

use super::DataError;
use nalgebra::{DMatrix, DVector};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Feature rows `a_i` with one label `b_i` per row. Labels are `{-1,+1}` for
/// classification and real offsets for log-sum-exp.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: DVector<f64>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>) -> Result<Self, DataError> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(DataError::Empty);
        }
        if features.nrows() != labels.len() {
            return Err(DataError::Parse {
                line: 0,
                msg: format!(
                    "{} feature rows but {} labels",
                    features.nrows(),
                    labels.len()
                ),
            });
        }
        if !features.iter().all(|v| v.is_finite()) || !labels.iter().all(|v| v.is_finite()) {
            return Err(DataError::NonFinite);
        }
        Ok(Dataset { features, labels })
    }

    pub fn m(&self) -> usize {
        self.features.nrows()
    }

    pub fn n(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    /// Checks the `{-1,+1}` label alphabet required by classification losses.
    pub fn validate_binary_labels(&self) -> Result<(), DataError> {
        for &b in self.labels.iter() {
            if b != 1.0 && b != -1.0 {
                return Err(DataError::BadLabel(b));
            }
        }
        Ok(())
    }
}

/// Loads an svmlight/libsvm sparse text file: one `label index:value ...`
/// sample per line, indices 1-based. The `{1,2}` label alphabet is remapped
/// to `{+1,-1}`; other labels pass through unchanged. The feature dimension
/// is the largest index observed.
pub fn load_sparse_text(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let label_tok = fields.next().expect("non-empty line has a first field");
        let label: f64 = label_tok.parse().map_err(|_| DataError::Parse {
            line: line_no,
            msg: format!("bad label `{label_tok}`"),
        })?;
        let label = match label {
            2.0 => -1.0,
            1.0 => 1.0,
            other => other,
        };
        let mut row = Vec::new();
        for tok in fields {
            let (i_str, v_str) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: line_no,
                msg: format!("expected index:value, got `{tok}`"),
            })?;
            let i: usize = i_str.parse().map_err(|_| DataError::Parse {
                line: line_no,
                msg: format!("bad feature index `{i_str}`"),
            })?;
            if i == 0 {
                return Err(DataError::Parse {
                    line: line_no,
                    msg: "feature indices are 1-based".into(),
                });
            }
            let v: f64 = v_str.parse().map_err(|_| DataError::Parse {
                line: line_no,
                msg: format!("bad feature value `{v_str}`"),
            })?;
            n = n.max(i);
            row.push((i - 1, v));
        }
        labels.push(label);
        rows.push(row);
    }
    if rows.is_empty() || n == 0 {
        return Err(DataError::Empty);
    }
    let m = rows.len();
    let mut features = DMatrix::zeros(m, n);
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            features[(r, c)] = v;
        }
    }
    Dataset::new(features, DVector::from_vec(labels))
}

/// Writes the sparse text format read by [`load_sparse_text`]. Values use
/// shortest round-trip formatting, so reading the file back reproduces the
/// dense matrix exactly.
pub fn write_sparse_text(path: impl AsRef<Path>, data: &Dataset) -> Result<(), DataError> {
    let mut out = fs::File::create(path)?;
    for i in 0..data.m() {
        let mut line = format!("{}", data.labels()[i]);
        for j in 0..data.n() {
            let v = data.features()[(i, j)];
            if v != 0.0 {
                line.push_str(&format!(" {}:{}", j + 1, v));
            }
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_sparse_line_into_dense_row() {
        let f = write_tmp("+1 1:0.5 3:2.0\n");
        let d = load_sparse_text(f.path()).unwrap();
        assert_eq!(d.m(), 1);
        assert_eq!(d.n(), 3);
        assert_eq!(d.row(0).as_slice(), &[0.5, 0.0, 2.0]);
        assert_eq!(d.labels()[0], 1.0);
    }

    #[test]
    fn remaps_one_two_labels() {
        let f = write_tmp("1 1:1.0\n2 1:-1.0\n");
        let d = load_sparse_text(f.path()).unwrap();
        assert_eq!(d.labels().as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn reports_line_number_on_garbage() {
        let f = write_tmp("+1 1:0.5\njunk\n");
        let err = load_sparse_text(f.path()).unwrap_err();
        match err {
            DataError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_file() {
        let f = write_tmp("");
        assert!(matches!(load_sparse_text(f.path()), Err(DataError::Empty)));
    }

    #[test]
    fn rejects_zero_index() {
        let f = write_tmp("+1 0:0.5\n");
        assert!(matches!(
            load_sparse_text(f.path()),
            Err(DataError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn label_alphabet_validation() {
        let f = write_tmp("3 1:1.0\n");
        let d = load_sparse_text(f.path()).unwrap();
        assert!(matches!(
            d.validate_binary_labels(),
            Err(DataError::BadLabel(v)) if v == 3.0
        ));
    }
}
