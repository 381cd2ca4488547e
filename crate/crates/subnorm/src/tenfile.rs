//! Plain-text `.ten` tensor files.
//!
//! ```text
//! 3 2 2 2
//! 1.0000000000000000e0 2.0000000000000000e0
//! ...
//! ```
//!
//! The first line holds the order `K` and the `K` dimensions. The remaining
//! whitespace-separated tokens are the entries, first index fastest. The
//! writer puts one mode-0 fiber per line with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use subnorm_core::tensor::MAX_ORDER;
use subnorm_core::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum TenError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("line {line}, column {column}: invalid number {text:?}")]
    Value { line: usize, column: usize, text: String },
    #[error("line {line}, column {column}: non-finite value {text:?}")]
    NonFinite { line: usize, column: usize, text: String },
    #[error("expected {expected} values after the header, found {found}")]
    Count { expected: usize, found: usize },
    #[error(transparent)]
    Tensor(#[from] subnorm_core::Error),
}

pub fn parse_tensor(text: &str) -> Result<Tensor, TenError> {
    let mut lines = text.lines().enumerate().skip_while(|(_, l)| l.trim().is_empty());
    let (header_idx, header) = lines.next().ok_or(TenError::Header { line: 1, message: "missing header".into() })?;
    let header_line = header_idx + 1;
    let bad = |message: String| TenError::Header { line: header_line, message };
    let fields: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| bad(format!("expected a non-negative integer, found {t:?}"))))
        .collect::<Result<_, _>>()?;
    let (&order, dims) = fields.split_first().ok_or_else(|| bad("empty header".into()))?;
    if order == 0 || order > MAX_ORDER {
        return Err(bad(format!("order must be between 1 and {MAX_ORDER}, found {order}")));
    }
    if dims.len() != order {
        return Err(bad(format!("order {order} needs {order} dimensions, found {}", dims.len())));
    }
    if dims.contains(&0) {
        return Err(bad("dimensions must be positive".into()));
    }
    let expected: usize = dims.iter().product();

    let mut data = Vec::with_capacity(expected);
    let mut found = 0;
    for (idx, line) in lines {
        for (column, token) in token_columns(line) {
            found += 1;
            if found > expected {
                continue;
            }
            let v: f64 = token.parse().map_err(|_| TenError::Value { line: idx + 1, column, text: token.into() })?;
            if !v.is_finite() {
                return Err(TenError::NonFinite { line: idx + 1, column, text: token.into() });
            }
            data.push(v);
        }
    }
    if found != expected {
        return Err(TenError::Count { expected, found });
    }
    Ok(Tensor::new(dims.to_vec(), data)?)
}

// Tokens with their 1-based byte column.
fn token_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split(|c: char| c.is_whitespace())
        .scan(0usize, |offset, tok| {
            let col = *offset;
            *offset += tok.len() + 1;
            Some((col + 1, tok))
        })
        .filter(|(_, t)| !t.is_empty())
}

pub fn format_tensor(x: &Tensor) -> String {
    let shape = x.shape();
    let mut out = String::with_capacity(x.len() * 25 + 16);
    out.push_str(&shape.len().to_string());
    for n in shape {
        let _ = write!(out, " {n}");
    }
    out.push('\n');
    for fiber in x.data().chunks(shape[0]) {
        for (i, v) in fiber.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, TenError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TenError::Io { path: path.into(), source })?;
    parse_tensor(&text)
}

pub fn write_tensor(x: &Tensor, path: impl AsRef<Path>) -> Result<(), TenError> {
    let path = path.as_ref();
    fs::write(path, format_tensor(x)).map_err(|source| TenError::Io { path: path.into(), source })
}
