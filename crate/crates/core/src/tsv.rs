//! Line-oriented text files shared by the pipeline stages.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{LscdError, Result};

/// One word per line; blank lines are skipped and duplicates rejected.
pub fn read_word_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut seen = std::collections::HashSet::new();
    let mut words = Vec::new();
    for (lineno, line) in read_lines(path)? {
        let word = line.trim();
        if word.is_empty() {
            continue;
        }
        if word.split_whitespace().count() != 1 {
            return Err(LscdError::parse(path, lineno, format!("expected one word, got {word:?}")));
        }
        if !seen.insert(word.to_owned()) {
            return Err(LscdError::parse(path, lineno, format!("duplicate word {word:?}")));
        }
        words.push(word.to_owned());
    }
    Ok(words)
}

pub fn write_word_list(path: impl AsRef<Path>, words: &[String]) -> Result<()> {
    write_lines(path, words.iter().map(String::as_str))
}

/// Two-column `key<TAB>value` rows, value parsed as `T`.
pub fn read_pairs<T: FromStr>(path: impl AsRef<Path>) -> Result<Vec<(usize, String, T)>> {
    let path = path.as_ref();
    let mut rows = Vec::new();
    for (lineno, line) in read_lines(path)? {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('\t')
            .ok_or_else(|| LscdError::parse(path, lineno, "expected two tab-separated fields"))?;
        if value.contains('\t') {
            return Err(LscdError::parse(path, lineno, "expected two tab-separated fields"));
        }
        let parsed = value
            .trim()
            .parse::<T>()
            .map_err(|_| LscdError::parse(path, lineno, format!("invalid value {value:?}")))?;
        rows.push((lineno, key.to_owned(), parsed));
    }
    Ok(rows)
}

/// Lines with 1-based line numbers, decoded as UTF-8.
pub fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| LscdError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| LscdError::parse(path, i + 1, e.to_string()))?;
        out.push((i + 1, line.trim_end_matches('\r').to_owned()));
    }
    Ok(out)
}

pub fn write_lines<'a>(path: impl AsRef<Path>, lines: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e| LscdError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for line in lines {
        out.write_all(line.as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_string(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| LscdError::io(path, e))
}
