//! Plain-text matrix formats: dense CSV (comma separated, one row per
//! line, no header) and Matrix Market coordinate files.
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so every write/read round trip is exact.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::CliError;

/// Location of a malformed token. Lines and columns are 1-based; the
/// column counts characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

/// Shortest decimal that reads back as exactly `v`.
pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}

fn parse_number(token: &str, line: usize, column: usize) -> Result<f64, ParseError> {
    let value: f64 = token.parse().map_err(|_| err(line, column, format!("not a number: {token:?}")))?;
    if !value.is_finite() {
        return Err(err(line, column, format!("non-finite value {token:?}")));
    }
    Ok(value)
}

/// Split a CSV line into trimmed fields with the 1-based character column
/// at which each one starts.
fn fields(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    for piece in line.split(',') {
        let lead = piece.len() - piece.trim_start().len();
        let column = line[..start + lead].chars().count() + 1;
        out.push((column, piece.trim()));
        start += piece.len() + 1;
    }
    out
}

/// Blank lines are skipped; every other line must have the same number of
/// fields.
pub fn parse_dense_csv(text: &str) -> Result<DMatrix<f64>, ParseError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let row = fields(line)
            .into_iter()
            .map(|(col, tok)| {
                if tok.is_empty() {
                    Err(err(line_no, col, "empty field"))
                } else {
                    parse_number(tok, line_no, col)
                }
            })
            .collect::<Result<Vec<f64>, _>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(err(line_no, 1, format!("expected {w} fields, found {}", row.len())));
            }
            _ => {}
        }
        rows.push(row);
    }
    let Some(d) = width else {
        return Err(err(1, 1, "no data rows"));
    };
    let n = rows.len();
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

/// A vector stored either as one column or as one row.
pub fn parse_vector_csv(text: &str) -> Result<DVector<f64>, ParseError> {
    let m = parse_dense_csv(text)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(err(
            1,
            1,
            format!("expected a single row or column, found {}x{}", m.nrows(), m.ncols()),
        ))
    }
}

pub fn format_dense_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// One value per line.
pub fn format_vector_csv(v: &DVector<f64>) -> String {
    v.iter().map(|x| format_number(*x) + "\n").collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Matrix Market `coordinate` files with `real` or `integer` fields and
/// `general`, `symmetric` or `skew-symmetric` storage. Repeated entries
/// are summed.
pub fn parse_matrix_market(text: &str) -> Result<DMatrix<f64>, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let (_, banner) = lines.next().ok_or_else(|| err(1, 1, "empty file"))?;
    let words: Vec<String> = banner.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(err(1, 1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>' banner"));
    }
    if words[2] != "coordinate" {
        return Err(err(1, 1, format!("unsupported format {:?}", words[2])));
    }
    if words[3] != "real" && words[3] != "integer" {
        return Err(err(1, 1, format!("unsupported field {:?}", words[3])));
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(err(1, 1, format!("unsupported symmetry {other:?}"))),
    };

    let mut data = lines.filter(|(_, l)| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let (size_line, size) = data.next().ok_or_else(|| err(1, 1, "missing size line"))?;
    let dims = tokens(size);
    if dims.len() != 3 {
        return Err(err(size_line, 1, "size line must be 'rows cols entries'"));
    }
    let mut header = [0usize; 3];
    for (slot, (col, tok)) in header.iter_mut().zip(dims) {
        *slot = tok.parse().map_err(|_| err(size_line, col, format!("not a count: {tok:?}")))?;
    }
    let [n, d, nnz] = header;
    if symmetry != Symmetry::General && n != d {
        return Err(err(size_line, 1, "symmetric storage requires a square matrix"));
    }
    let mut m = DMatrix::zeros(n, d);
    let mut seen = 0usize;
    for (line_no, line) in data {
        let toks = tokens(line);
        if toks.len() != 3 {
            return Err(err(line_no, 1, format!("expected 'row col value', found {} fields", toks.len())));
        }
        let index = |k: usize, limit: usize| -> Result<usize, ParseError> {
            let (col, tok) = toks[k];
            let v: usize = tok.parse().map_err(|_| err(line_no, col, format!("not an index: {tok:?}")))?;
            if v == 0 || v > limit {
                return Err(err(line_no, col, format!("index {v} outside 1..={limit}")));
            }
            Ok(v - 1)
        };
        let (i, j) = (index(0, n)?, index(1, d)?);
        let value = parse_number(toks[2].1, line_no, toks[2].0)?;
        m[(i, j)] += value;
        if i != j {
            match symmetry {
                Symmetry::Symmetric => m[(j, i)] += value,
                Symmetry::SkewSymmetric => m[(j, i)] -= value,
                Symmetry::General => {}
            }
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(err(size_line, 1, format!("header declares {nnz} entries, found {seen}")));
    }
    Ok(m)
}

fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut column = 0;
    let mut start = None;
    for (pos, ch) in line.char_indices() {
        column += 1;
        if ch.is_whitespace() {
            if let Some((c, s)) = start.take() {
                out.push((c, &line[s..pos]));
            }
        } else if start.is_none() {
            start = Some((column, pos));
        }
    }
    if let Some((c, s)) = start {
        out.push((c, &line[s..]));
    }
    out
}

/// Nonzero entries only, column-major order.
pub fn format_matrix_market(m: &DMatrix<f64>) -> String {
    let mut body = String::new();
    let mut nnz = 0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                body.push_str(&format!("{} {} {}\n", i + 1, j + 1, format_number(v)));
                nnz += 1;
            }
        }
    }
    format!(
        "%%MatrixMarket matrix coordinate real general\n{} {} {}\n{}",
        m.nrows(),
        m.ncols(),
        nnz,
        body
    )
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn located<T>(path: &Path, r: Result<T, ParseError>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Matrix Market when the extension is `.mtx` or the file starts with the
/// banner, dense CSV otherwise.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let text = read(path)?;
    let is_mm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mtx")) || text.starts_with("%%MatrixMarket");
    located(
        path,
        if is_mm {
            parse_matrix_market(&text)
        } else {
            parse_dense_csv(&text)
        },
    )
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>, CliError> {
    let text = read(path)?;
    located(path, parse_vector_csv(&text))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}
