use std::path::Path;

use super::io_error;
use crate::error::{FormatError, Result};

/// Optional first line, skipped when present.
pub const TSV_HEADER: &str = "source\ttarget";

/// Parses `source<TAB>target` lines. Text is passed through untouched apart
/// from a trailing `\r`.
pub fn parse_pair_tsv(text: &str) -> Result<Vec<(String, String)>, FormatError> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if idx == 0 && line == TSV_HEADER {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(src), Some(tgt), None) => pairs.push((src.to_owned(), tgt.to_owned())),
            _ => return Err(FormatError::MalformedLine { line: idx + 1 }),
        }
    }
    Ok(pairs)
}

pub fn read_pair_tsv(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| FormatError::InvalidUtf8("TSV file"))?;
    Ok(parse_pair_tsv(&text)?)
}
