//! Plain-text file formats and feature ingestion.
//!
//! Matrices: a `rows,cols` header followed by `rows` lines of
//! comma-separated values, each written in the shortest decimal form that
//! parses back to the same `f64`.
//!
//! Annotations: a comment header, then `j,i_start,i_end` lines (0-based,
//! end-exclusive). Predictions: a comment header, then one `i,j` line per
//! interval.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{AlignError, Result};
use crate::matrix::FeatureMatrix;
use crate::polytope::AlignmentPath;
use crate::supervision::{AnnotatedInterval, Annotation};

pub const ANNOTATION_HEADER: &str = "# text_index,interval_start,interval_end (0-based, end-exclusive)";
pub const PREDICTION_HEADER: &str = "# interval,text_index (0-based)";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| AlignError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| AlignError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> AlignError {
    AlignError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{},{}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<FeatureMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "missing 'rows,cols' header"))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(path, 1, format!("malformed header '{header}'")))?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(path, 1, format!("malformed header '{header}'")));
    };
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        seen += 1;
        if seen > rows {
            return Err(parse_err(path, lineno, format!("ragged input: more than {rows} data rows")));
        }
        let start = values.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("non-numeric token '{}'", tok.trim())))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, format!("non-finite value '{}'", tok.trim())));
            }
            values.push(v);
        }
        if values.len() - start != cols {
            return Err(parse_err(
                path,
                lineno,
                format!("ragged input: expected {cols} values, found {}", values.len() - start),
            ));
        }
    }
    if seen != rows {
        return Err(parse_err(path, seen + 1, format!("ragged input: expected {rows} data rows, found {seen}")));
    }
    FeatureMatrix::from_row_slice(rows, cols, &values).map_err(|e| parse_err(path, 1, e.to_string()))
}

pub fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    parse_matrix(&read_text(path)?, path)
}

pub fn write_matrix(path: &Path, m: &FeatureMatrix) -> Result<()> {
    write_text(path, &format_matrix(m.as_matrix()))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_usizes<const N: usize>(line: &str, lineno: usize, path: &Path) -> Result<[usize; N]> {
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(parse_err(path, lineno, format!("expected {N} fields, found {}", parts.len())));
    }
    let mut out = [0; N];
    for (slot, tok) in out.iter_mut().zip(parts) {
        *slot = tok
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("not a non-negative integer: '{tok}'")))?;
    }
    Ok(out)
}

/// Parses an annotation; per-line checks only (non-empty intervals,
/// ordering). Range checks need the stream sizes, see
/// [`Annotation::validate`].
pub fn parse_annotations(text: &str, path: &Path) -> Result<Annotation> {
    let mut entries = Vec::new();
    for (lineno, line) in data_lines(text) {
        let [text_index, start, end] = parse_usizes::<3>(line, lineno, path)?;
        if start >= end {
            return Err(parse_err(path, lineno, format!("empty interval [{start}, {end})")));
        }
        entries.push(AnnotatedInterval { text_index, start, end });
    }
    let ann = Annotation::new(entries);
    // usize::MAX bounds: only ordering and overlap are checked here
    ann.validate(usize::MAX, usize::MAX)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    Ok(ann)
}

pub fn read_annotations(path: &Path) -> Result<Annotation> {
    parse_annotations(&read_text(path)?, path)
}

pub fn format_annotations(ann: &Annotation) -> String {
    let mut out = format!("{ANNOTATION_HEADER}\n");
    for e in ann.entries() {
        writeln!(out, "{},{},{}", e.text_index, e.start, e.end).unwrap();
    }
    out
}

pub fn write_annotations(path: &Path, ann: &Annotation) -> Result<()> {
    write_text(path, &format_annotations(ann))
}

pub fn format_predictions(p: &AlignmentPath) -> String {
    let mut out = format!("{PREDICTION_HEADER}\n");
    for (i, j) in p.assignment().iter().enumerate() {
        writeln!(out, "{i},{j}").unwrap();
    }
    out
}

pub fn write_predictions(path: &Path, p: &AlignmentPath) -> Result<()> {
    write_text(path, &format_predictions(p))
}

/// Reads a prediction file for a stream with `j_count` text elements.
pub fn read_predictions(path: &Path, j_count: usize) -> Result<AlignmentPath> {
    let text = read_text(path)?;
    let mut assignment = Vec::new();
    for (lineno, line) in data_lines(&text) {
        let [i, j] = parse_usizes::<2>(line, lineno, path)?;
        if i != assignment.len() {
            return Err(parse_err(path, lineno, format!("expected interval {}, found {i}", assignment.len())));
        }
        if j >= j_count {
            return Err(parse_err(path, lineno, format!("text index {j} out of range (J = {j_count})")));
        }
        assignment.push(j);
    }
    AlignmentPath::new(assignment, j_count).map_err(|e| parse_err(path, 0, e.to_string()))
}

/// Inserts a zero column before, between and after the `K` text columns:
/// zeros land at 0-based indices `0, 2, ..., 2K` and text column `k` at
/// `2k + 1`. Returns the widened matrix and the background indices.
pub fn interleave_background(psi_raw: &FeatureMatrix) -> (FeatureMatrix, Vec<usize>) {
    let (e, k) = (psi_raw.rows(), psi_raw.cols());
    let mut out = DMatrix::zeros(e, 2 * k + 1);
    for c in 0..k {
        out.set_column(2 * c + 1, &psi_raw.as_matrix().column(c));
    }
    let background = (0..=k).map(|c| 2 * c).collect();
    (FeatureMatrix::new(out).expect("zeros and finite columns"), background)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.csv")
    }

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let m = FeatureMatrix::from_row_slice(
            3,
            4,
            &[0.1, -2.5e-300, 1.0 / 3.0, 7.0, f64::MAX, f64::MIN_POSITIVE, -0.0, 1e22, 5e-324, 2.0, -1.7, 0.3],
        )
        .unwrap();
        let back = parse_matrix(&format_matrix(m.as_matrix()), p()).unwrap();
        for (a, b) in m.as_matrix().iter().zip(back.as_matrix().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn matrix_errors() {
        let e = parse_matrix("2,2\n1,2\n3,4\n5,6\n", p()).unwrap_err();
        assert!(e.to_string().contains("ragged"), "{e}");
        assert!(e.to_string().contains(":4:"), "{e}");
        let e = parse_matrix("", p()).unwrap_err();
        assert!(e.to_string().contains("header"), "{e}");
        let e = parse_matrix("2,2\n1,2\n3\n", p()).unwrap_err();
        assert!(e.to_string().contains("ragged"), "{e}");
        let e = parse_matrix("1,2\n1,x\n", p()).unwrap_err();
        assert!(e.to_string().contains("non-numeric") && e.to_string().contains(":2:"), "{e}");
        assert!(parse_matrix("2\n1\n", p()).is_err());
        assert!(parse_matrix("2,1\n1\n", p()).is_err());
    }

    #[test]
    fn annotations_round_trip() {
        let ann = Annotation::new(vec![
            AnnotatedInterval { text_index: 1, start: 0, end: 4 },
            AnnotatedInterval { text_index: 3, start: 4, end: 9 },
        ]);
        let back = parse_annotations(&format_annotations(&ann), p()).unwrap();
        assert_eq!(back, ann);
        assert!(parse_annotations("1,4,2\n", p()).is_err());
        assert!(parse_annotations("1,0,4\n3,2,6\n", p()).is_err());
        assert!(parse_annotations("1,0\n", p()).is_err());
    }

    #[test]
    fn predictions_cover_every_interval() {
        let path = AlignmentPath::new(vec![0, 0, 1, 2, 2, 2], 3).unwrap();
        let text = format_predictions(&path);
        assert_eq!(text.lines().count(), 1 + 6);
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("pred.csv");
        write_predictions(&f, &path).unwrap();
        assert_eq!(read_predictions(&f, 3).unwrap(), path);
        assert!(read_predictions(&f, 2).is_err());
    }

    #[test]
    fn interleaving() {
        let raw = FeatureMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let (psi, bg) = interleave_background(&raw);
        assert_eq!(psi.cols(), 5);
        assert_eq!(bg, vec![0, 2, 4]);
        for &b in &bg {
            assert_eq!(psi.as_matrix().column(b).norm(), 0.0);
        }
        assert_eq!(psi.as_matrix().column(1), raw.as_matrix().column(0));
        assert_eq!(psi.as_matrix().column(3), raw.as_matrix().column(1));

        let one = FeatureMatrix::from_row_slice(1, 1, &[5.0]).unwrap();
        let (psi, bg) = interleave_background(&one);
        assert_eq!((psi.cols(), bg), (3, vec![0, 2]));
        assert_eq!(psi.as_matrix()[(0, 1)], 5.0);
    }
}
