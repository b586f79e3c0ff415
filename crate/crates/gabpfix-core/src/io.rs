//! Readers for Matrix Market coordinate files and plain-text vectors.
//!
//! Symmetric matrices use the `matrix coordinate real symmetric` header and
//! store one entry per unordered index pair (either triangle). Rectangular
//! matrices use `matrix coordinate real general`. Vectors are plain text,
//! one real per line, with `#` comment lines. All errors carry the file
//! path and, where it makes sense, the offending line number.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use crate::sparse::{BuildError, RectMatrix, SparseSymMatrix};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Build {
        path: String,
        #[source]
        source: BuildError,
    },
}

/// Header declared by a Matrix Market file, already lower-cased.
struct MmHeader {
    symmetry: String,
}

struct LineReader {
    path: String,
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
}

impl LineReader {
    fn open(path: &Path) -> Result<Self, IoError> {
        let file = File::open(path).map_err(|source| IoError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Ok(LineReader {
            path: path.display().to_string(),
            lines: BufReader::new(file).lines(),
            line_no: 0,
        })
    }

    fn parse_err(&self, message: impl Into<String>) -> IoError {
        IoError::Parse {
            path: self.path.clone(),
            line: self.line_no,
            message: message.into(),
        }
    }

    /// Next line with its comment handling done: returns trimmed non-empty
    /// lines, skipping blanks and lines starting with any of `comment`.
    fn next_data_line(&mut self, comment: &[char]) -> Result<Option<String>, IoError> {
        loop {
            self.line_no += 1;
            match self.lines.next() {
                None => return Ok(None),
                Some(Err(source)) => {
                    return Err(IoError::Read {
                        path: self.path.clone(),
                        source,
                    })
                }
                Some(Ok(raw)) => {
                    let trimmed = raw.trim();
                    if trimmed.is_empty() || trimmed.starts_with(comment) {
                        continue;
                    }
                    return Ok(Some(trimmed.to_string()));
                }
            }
        }
    }
}

/// Parses and validates the `%%MatrixMarket` banner line.
fn read_mm_header(reader: &mut LineReader) -> Result<MmHeader, IoError> {
    reader.line_no += 1;
    let banner = match reader.lines.next() {
        None => return Err(reader.parse_err("empty file, expected %%MatrixMarket banner")),
        Some(Err(source)) => {
            return Err(IoError::Read {
                path: reader.path.clone(),
                source,
            })
        }
        Some(Ok(line)) => line,
    };
    let tokens: Vec<String> = banner.split_whitespace().map(str::to_lowercase).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(reader.parse_err("expected %%MatrixMarket banner"));
    }
    let expect = |idx: usize, want: &str| -> Result<(), IoError> {
        match tokens.get(idx) {
            Some(got) if got == want => Ok(()),
            got => Err(reader.parse_err(format!(
                "unsupported header: expected '{want}', got '{}'",
                got.map(String::as_str).unwrap_or("")
            ))),
        }
    };
    expect(1, "matrix")?;
    expect(2, "coordinate")?;
    expect(3, "real")?;
    let symmetry = tokens
        .get(4)
        .ok_or_else(|| reader.parse_err("missing symmetry field in header"))?
        .clone();
    Ok(MmHeader { symmetry })
}

/// Reads the `rows cols nnz` size line plus exactly `nnz` coordinate
/// entries, returned 0-based.
fn read_coordinates(reader: &mut LineReader) -> Result<(usize, usize, Vec<(usize, usize, f64)>), IoError> {
    let size_line = reader
        .next_data_line(&['%'])?
        .ok_or_else(|| reader.parse_err("missing size line"))?;
    let dims: Vec<&str> = size_line.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(reader.parse_err("size line must be 'rows cols nnz'"));
    }
    let parse_dim = |s: &str| -> Result<usize, IoError> {
        s.parse::<usize>()
            .map_err(|_| reader.parse_err(format!("invalid size field '{s}'")))
    };
    let rows = parse_dim(dims[0])?;
    let cols = parse_dim(dims[1])?;
    let nnz = parse_dim(dims[2])?;

    let mut entries = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let line = reader
            .next_data_line(&['%'])?
            .ok_or_else(|| reader.parse_err(format!("expected {nnz} entries, file ended early")))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(reader.parse_err("entry line must be 'row col value'"));
        }
        let row: usize = fields[0]
            .parse()
            .map_err(|_| reader.parse_err(format!("invalid row index '{}'", fields[0])))?;
        let col: usize = fields[1]
            .parse()
            .map_err(|_| reader.parse_err(format!("invalid column index '{}'", fields[1])))?;
        let val: f64 = fields[2]
            .parse()
            .map_err(|_| reader.parse_err(format!("invalid value '{}'", fields[2])))?;
        if row == 0 || col == 0 {
            return Err(reader.parse_err("indices are 1-based; found 0"));
        }
        entries.push((row - 1, col - 1, val));
    }
    if let Some(extra) = reader.next_data_line(&['%'])? {
        return Err(reader.parse_err(format!("unexpected trailing data '{extra}'")));
    }
    Ok((rows, cols, entries))
}

/// Reads a symmetric matrix from a `matrix coordinate real symmetric` file.
/// Either triangle may be stored; absent diagonal entries default to zero.
pub fn read_sym_matrix(path: impl AsRef<Path>) -> Result<SparseSymMatrix, IoError> {
    let path = path.as_ref();
    let mut reader = LineReader::open(path)?;
    let header = read_mm_header(&mut reader)?;
    if header.symmetry != "symmetric" {
        return Err(reader.parse_err(format!(
            "expected symmetry 'symmetric', got '{}'",
            header.symmetry
        )));
    }
    let (rows, cols, entries) = read_coordinates(&mut reader)?;
    if rows != cols {
        return Err(reader.parse_err(format!(
            "symmetric matrix must be square, got {rows}x{cols}"
        )));
    }
    SparseSymMatrix::from_entries(rows, entries).map_err(|source| IoError::Build {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a rectangular matrix from a `matrix coordinate real general` file.
pub fn read_rect_matrix(path: impl AsRef<Path>) -> Result<RectMatrix, IoError> {
    let path = path.as_ref();
    let mut reader = LineReader::open(path)?;
    let header = read_mm_header(&mut reader)?;
    if header.symmetry != "general" {
        return Err(reader.parse_err(format!(
            "expected symmetry 'general', got '{}'",
            header.symmetry
        )));
    }
    let (rows, cols, entries) = read_coordinates(&mut reader)?;
    RectMatrix::from_entries(rows, cols, entries).map_err(|source| IoError::Build {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a vector: one real per line, blank lines and `#` comments skipped.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>, IoError> {
    let path = path.as_ref();
    let mut reader = LineReader::open(path)?;
    let mut out = Vec::new();
    while let Some(line) = reader.next_data_line(&['#'])? {
        let val: f64 = line
            .parse()
            .map_err(|_| reader.parse_err(format!("invalid real number '{line}'")))?;
        out.push(val);
    }
    Ok(out)
}
