use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// A row type stored as one tab-separated line.
///
/// Text fields may not contain tabs, newlines or double quotes, so rows never
/// need quoting.
pub trait Record: Sized {
    /// File stem of the table.
    const TABLE: &'static str;
    const COLUMNS: &'static [&'static str];

    fn fields(&self) -> Vec<String>;

    fn parse(fields: &[&str]) -> Result<Self, String>;

    /// Checks invariants a stored row must satisfy.
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }

    /// Rows with a key must be unique by it within the table.
    fn key(&self) -> Option<String> {
        None
    }
}

pub fn version_line(table: &str) -> String {
    format!("#hyql {table} v{FORMAT_VERSION}")
}

pub fn header_line<R: Record>() -> String {
    R::COLUMNS.join("\t")
}

pub fn check_text(column: &str, value: &str) -> Result<(), String> {
    if value.is_empty() || value.contains(['\t', '\n', '\r', '"']) {
        return Err(format!(
            "{column} {value:?} must be non-empty without tabs, newlines or quotes"
        ));
    }
    Ok(())
}

/// Formats validated rows, one line each.
pub fn format_rows<R: Record>(rows: &[R]) -> Result<String, (usize, String)> {
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        row.validate().map_err(|m| (i, m))?;
        let fields = row.fields();
        debug_assert_eq!(fields.len(), R::COLUMNS.len());
        for (column, value) in R::COLUMNS.iter().zip(&fields) {
            check_text(column, value).map_err(|m| (i, m))?;
        }
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    Ok(out)
}

/// Whole-table text including the version and column headers.
pub fn render<R: Record>(rows: &[R]) -> Result<String, (usize, String)> {
    Ok(format!(
        "{}\n{}\n{}",
        version_line(R::TABLE),
        header_line::<R>(),
        format_rows(rows)?
    ))
}

/// Parses table text; line numbers in errors are 1-based file lines.
pub fn parse_text<R: Record>(text: &str, origin: &Path) -> Result<Vec<R>> {
    let mut lines = text.lines();
    let version = lines.next().unwrap_or_default();
    if version != version_line(R::TABLE) {
        return Err(Error::data(
            origin,
            1,
            format!("expected {:?}, found {version:?}", version_line(R::TABLE)),
        ));
    }
    let header = lines.next().unwrap_or_default();
    if header != header_line::<R>() {
        return Err(Error::data(origin, 2, format!("unexpected column header {header:?}")));
    }
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(Error::data(origin, text.lines().count(), "truncated final row"));
    }

    let body = text.splitn(3, '\n').nth(2).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .quoting(false)
        .from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize + 2);
            Error::data(origin, line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize + 2);
        let fields: Vec<&str> = record.iter().collect();
        if fields.len() != R::COLUMNS.len() {
            return Err(Error::data(
                origin,
                line,
                format!("{} fields, expected {}", fields.len(), R::COLUMNS.len()),
            ));
        }
        let row = R::parse(&fields).map_err(|m| Error::data(origin, line, m))?;
        row.validate().map_err(|m| Error::data(origin, line, m))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_table<R: Record>(path: &Path) -> Result<Vec<R>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_text(&text, path)
}

/// Replaces `path` atomically with `text`.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp: PathBuf = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_table<R: Record>(path: &Path, rows: &[R]) -> Result<()> {
    let text = render(rows).map_err(|(i, m)| Error::data(path, i + 3, m))?;
    write_atomic(path, &text)
}

/// Appends rows in one write after validating all of them, so a bad row
/// leaves the file untouched.
pub fn append_rows<R: Record>(path: &Path, rows: &[R]) -> Result<()> {
    let existing: Vec<R> = read_table(path)?;
    let lines = existing.len() + 2;
    let text = format_rows(rows).map_err(|(i, m)| Error::data(path, lines + i + 1, m))?;
    if rows.iter().any(|r| r.key().is_some()) {
        let mut keys: std::collections::BTreeSet<String> = existing.iter().filter_map(Record::key).collect();
        for (i, row) in rows.iter().enumerate() {
            if let Some(k) = row.key() {
                if !keys.insert(k.clone()) {
                    return Err(Error::data(path, lines + i + 1, format!("duplicate key {k}")));
                }
            }
        }
    }
    let mut file = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Helpers shared by the record parsers.
pub mod field {
    use std::str::FromStr;

    pub fn parse<T: FromStr>(column: &str, value: &str) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        value.parse().map_err(|e| format!("{column} {value:?}: {e}"))
    }

    pub fn flag(column: &str, value: &str) -> Result<bool, String> {
        match value {
            "1" => Ok(true),
            "0" => Ok(false),
            _ => Err(format!("{column} {value:?} is not 0 or 1")),
        }
    }

    pub fn reward(column: &str, value: f64) -> Result<(), String> {
        if value == 0.0 || value == 1.0 {
            Ok(())
        } else {
            Err(format!("{column} {value} is not 0 or 1"))
        }
    }
}
