//! Output plumbing: 17-significant-digit floats, CSV assembly with LF
//! line endings, JSON text, and the file-or-stdout sink.

use std::io::Write;
use std::path::Path;

use crate::errors::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub fn parse_format(name: &str) -> Result<Format, CliError> {
    match name {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        other => Err(CliError::Usage(format!(
            "format: expected csv or json, got '{other}'"
        ))),
    }
}

/// 17 significant digits: every `f64` round-trips exactly.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Optional float; `None` renders as the empty cell.
pub fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

/// Optional count; `None` renders as the empty cell.
pub fn opt_usize(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

/// One CSV line from already-rendered cells, LF-terminated.
pub fn csv_line(cells: &[String]) -> String {
    let mut line = cells.join(",");
    line.push('\n');
    line
}

/// JSON document text, LF-terminated. serde_json prints floats in
/// shortest round-trip form, so parsing the text back reproduces every
/// numeric field bit-exactly.
pub fn json_text(value: &serde_json::Value) -> String {
    let mut text =
        serde_json::to_string_pretty(value).expect("JSON serialization of finite data");
    text.push('\n');
    text
}

/// Writes the document to the path, or to standard output when no path
/// is given.
pub fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| CliError::Io(format!("cannot write to standard output: {e}")))
        }
    }
}
