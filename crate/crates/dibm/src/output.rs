//! CSV and JSON emission helpers.
//!
//! Every float is written with 17 significant digits so files round-trip
//! losslessly and regression diffs are byte-stable. Existing files are never
//! overwritten unless the caller passed an explicit overwrite flag.

use std::fs;
use std::io;
use std::path::Path;

/// Render a float at 17 significant digits (1 + 16 fractional digits of the
/// scientific mantissa), enough to reproduce any f64 exactly on parse.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ensure_dir(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)
}

/// Write a file, refusing to clobber an existing one unless `overwrite`.
pub fn guarded_write(path: &Path, contents: &str, overwrite: bool) -> io::Result<()> {
    if path.exists() && !overwrite {
        return Err(io::Error::new(
            io::ErrorKind::AlreadyExists,
            format!(
                "{} already exists; pass --overwrite to replace it",
                path.display()
            ),
        ));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)
}

/// Minimal CSV table with a mandatory header row, comma separators, `.`
/// decimal points, and `\n` line endings. Fields never contain commas, so no
/// quoting is needed.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path, overwrite: bool) -> io::Result<()> {
        guarded_write(path, &self.render(), overwrite)
    }
}

/// Parse CSV text produced by [`CsvTable`]: a header row plus string fields.
pub fn parse_csv(text: &str) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let header = lines.next()?.split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Some((header, rows))
}
