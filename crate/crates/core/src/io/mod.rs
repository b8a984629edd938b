//! On-disk formats: PNG images, line-oriented text records, and the forest
//! model file. Text formats are whitespace-delimited UTF-8 with `#` comments;
//! floats are written in shortest round-trip form, so every writer/reader
//! pair is bit-exact.

pub mod model;
pub mod png;
pub mod text;

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Shortest decimal form that parses back to exactly the same f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn parse_f64(path: &Path, line: usize, token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| Error::format(path, line, format!("bad float {token:?}")))
}

pub(crate) fn parse_usize(path: &Path, line: usize, token: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| Error::format(path, line, format!("bad integer {token:?}")))
}

pub(crate) fn parse_u32(path: &Path, line: usize, token: &str) -> Result<u32> {
    token
        .parse::<u32>()
        .map_err(|_| Error::format(path, line, format!("bad id {token:?}")))
}

pub(crate) fn parse_i32(path: &Path, line: usize, token: &str) -> Result<i32> {
    token
        .parse::<i32>()
        .map_err(|_| Error::format(path, line, format!("bad offset {token:?}")))
}

/// Reads a text file into (1-based line number, content) pairs, dropping
/// blank lines and `#` comments.
pub(crate) fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let line = match line.find('#') {
                Some(at) => &line[..at],
                None => line,
            };
            (i + 1, line.trim().to_string())
        })
        .filter(|(_, line)| !line.is_empty())
        .collect())
}

pub(crate) fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Joins float tokens with single spaces, each in round-trip form.
pub fn float_row(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:?}");
    }
    s
}
