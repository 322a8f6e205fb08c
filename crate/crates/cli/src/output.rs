//! File output helpers shared by the subcommands.

use std::path::Path;

use serde_json::Value;

use mabtune_sim::metrics::write_text;
use mabtune_sim::Result;

/// Writes a pretty-printed JSON value with a trailing newline.
pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Renders one CSV from a header and rows of pre-formatted fields.
pub fn csv_from_rows(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}
