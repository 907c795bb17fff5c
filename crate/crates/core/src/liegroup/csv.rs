//! Plain-text matrix files: one row per line, comma separated, `%.17g`.
//!
//! Lines starting with `#` are comments and blank lines are ignored, so a
//! writer may prepend metadata without breaking the loader.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fmt::g17;

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| g17(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: {:?}: {e}", lineno + 1, field.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("matrix file holds no rows".into()));
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_to_csv(m)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    matrix_from_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::{rotation_at, skew_family, RotationMatrix};
    use proptest::prelude::*;

    #[test]
    fn skips_comments_and_blank_lines() {
        let m = matrix_from_csv("# metadata\n1,2\n\n3,4\n").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(matrix_from_csv("1,2\n3\n").is_err());
        assert!(matrix_from_csv("1,x\n").is_err());
        assert!(matrix_from_csv("# only a comment\n").is_err());
    }

    #[test]
    fn file_round_trip_validates_as_rotation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        let q = rotation_at(&skew_family(3).unwrap(), 1.2);
        write_matrix_csv(&path, q.as_matrix()).unwrap();
        let back = RotationMatrix::new(read_matrix_csv(&path).unwrap()).unwrap();
        assert_eq!(back, q);
    }

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(entries in proptest::collection::vec(any::<f64>(), 9)) {
            prop_assume!(entries.iter().all(|v| v.is_finite()));
            let m = DMatrix::from_vec(3, 3, entries);
            let back = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
            for (a, b) in m.iter().zip(back.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
