//! Text matrix format: a `rows cols` header line followed by one line per
//! row of space-separated decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Matrix;
use crate::error::{Error, Result};

/// Parses the text format. Line numbers in errors are 1-based.
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let dims: Vec<&str> = header.split_ascii_whitespace().collect();
    let (rows, cols) = match dims.as_slice() {
        [r, c] => (parse_dim(r)?, parse_dim(c)?),
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("malformed header {header:?}, expected \"rows cols\""),
            })
        }
    };

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (line_no, line) in lines {
        if seen == rows {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::Parse {
                line: line_no,
                msg: format!("unexpected row beyond the {rows} declared"),
            });
        }
        let before = data.len();
        for tok in line.split_ascii_whitespace() {
            let x: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("non-numeric token {tok:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value {tok:?}"),
                });
            }
            data.push(x);
        }
        let found = data.len() - before;
        if found != cols {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {cols} values, found {found}"),
            });
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse {
            line: seen + 2,
            msg: format!("expected {rows} rows, found {seen}"),
        });
    }
    Matrix::new(rows, cols, data)
}

fn parse_dim(tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse {
        line: 1,
        msg: format!("malformed header dimension {tok:?}"),
    })
}

/// Serializes with the shortest decimal that round-trips each `f64`.
pub fn format_matrix(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for row in m.iter_rows() {
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{x:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_matrix(&text).map_err(|e| e.in_file(path))
}

pub fn write_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m)).map_err(|e| Error::from(e).in_file(path))
}
