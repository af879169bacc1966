//! Reader for the real subset of the Matrix Market exchange format and a
//! dense writer.
//!
//! Accepted headers: `%%MatrixMarket matrix {coordinate|array}
//! {real|integer|pattern} {general|symmetric|skew-symmetric}`. Coordinate data
//! is densified; array data is column-major.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

pub fn read_matrix_market(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text, path)
}

/// Parses Matrix Market text; `path` is only used in error messages.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<Matrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(
            hline,
            format!("expected a '%%MatrixMarket matrix' header, got '{header}'"),
        ));
    }
    let format = match tokens[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(err(hline, format!("unsupported format '{other}'"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(err(hline, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(err(hline, format!("unsupported symmetry '{other}'"))),
    };
    if field == Field::Pattern && format == Format::Array {
        return Err(err(hline, "pattern field requires coordinate format".into()));
    }

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let parse_usize = |line: usize, tok: &str| {
        tok.parse::<usize>()
            .map_err(|_| err(line, format!("expected a non-negative integer, got '{tok}'")))
    };
    let parse_value = |line: usize, tok: &str| -> Result<f64> {
        let v = match field {
            Field::Integer => tok.parse::<i64>().map(|v| v as f64).ok(),
            _ => tok.parse::<f64>().ok(),
        };
        match v {
            Some(v) if v.is_finite() => Ok(v),
            Some(_) => Err(err(line, format!("non-finite value '{tok}'"))),
            None => Err(err(line, format!("cannot parse value '{tok}'"))),
        }
    };

    let (sline, size) = data.next().ok_or_else(|| err(hline, "missing size line".into()))?;
    let size: Vec<&str> = size.split_whitespace().collect();
    let expected = if format == Format::Coordinate { 3 } else { 2 };
    if size.len() != expected {
        return Err(err(sline, format!("size line needs {expected} integers")));
    }
    let rows = parse_usize(sline, size[0])?;
    let cols = parse_usize(sline, size[1])?;
    if rows == 0 || cols == 0 {
        return Err(err(sline, format!("empty {rows}x{cols} matrix")));
    }
    if symmetry != Symmetry::General && rows != cols {
        return Err(err(sline, "symmetric storage requires a square matrix".into()));
    }
    let mut m = Matrix::zeros(rows, cols);
    let mirror = |m: &mut Matrix, i: usize, j: usize, v: f64| {
        m[(i, j)] = v;
        match symmetry {
            Symmetry::General => {}
            Symmetry::Symmetric => m[(j, i)] = v,
            Symmetry::SkewSymmetric => m[(j, i)] = -v,
        }
    };

    match format {
        Format::Coordinate => {
            let nnz = parse_usize(sline, size[2])?;
            let mut last_line = sline;
            for k in 0..nnz {
                let (line, entry) = data
                    .next()
                    .ok_or_else(|| err(last_line, format!("expected {nnz} entries, found {k}")))?;
                last_line = line;
                let toks: Vec<&str> = entry.split_whitespace().collect();
                let want = if field == Field::Pattern { 2 } else { 3 };
                if toks.len() != want {
                    return Err(err(line, format!("expected {want} fields, got {}", toks.len())));
                }
                let i = parse_usize(line, toks[0])?;
                let j = parse_usize(line, toks[1])?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(err(line, format!("index ({i}, {j}) outside {rows}x{cols}")));
                }
                if symmetry != Symmetry::General && j > i {
                    return Err(err(line, "symmetric storage lists the lower triangle only".into()));
                }
                let v = if field == Field::Pattern {
                    1.0
                } else {
                    parse_value(line, toks[2])?
                };
                mirror(&mut m, i - 1, j - 1, v);
            }
        }
        Format::Array => {
            let positions: Vec<(usize, usize)> = (0..cols)
                .flat_map(|j| {
                    let start = match symmetry {
                        Symmetry::General => 0,
                        Symmetry::Symmetric => j,
                        Symmetry::SkewSymmetric => j + 1,
                    };
                    (start..rows).map(move |i| (i, j))
                })
                .collect();
            let mut last_line = sline;
            let mut k = 0;
            while k < positions.len() {
                let (line, entry) = data
                    .next()
                    .ok_or_else(|| err(last_line, format!("expected {} values, found {k}", positions.len())))?;
                last_line = line;
                for tok in entry.split_whitespace() {
                    let Some(&(i, j)) = positions.get(k) else {
                        return Err(err(line, "too many values".into()));
                    };
                    mirror(&mut m, i, j, parse_value(line, tok)?);
                    k += 1;
                }
            }
        }
    }
    if let Some((line, _)) = data.next() {
        return Err(err(line, "unexpected trailing data".into()));
    }
    Ok(m)
}

/// Writes a dense array file. Values use the shortest exponent form that
/// parses back to the same `f64`.
pub fn write_matrix_market(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::with_capacity(24 * m.len() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let _ = writeln!(out, "{:e}", m[(i, j)]);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
