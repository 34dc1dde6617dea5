//! Rendering of reports as JSON, CSV or Markdown rows.

use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Md,
}

/// A report that can be printed as a single table row.
pub struct Table<'a> {
    /// Row label for Markdown output (usually the target language).
    pub lang: &'a str,
    pub columns: &'a [&'a str],
    pub values: Vec<Cell>,
}

pub enum Cell {
    Real(f64),
    Count(usize),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // Debug keeps a trailing ".0" on integral values.
            Cell::Real(v) => format!("{v:?}"),
            Cell::Count(n) => n.to_string(),
        }
    }

    fn md(&self) -> String {
        match self {
            Cell::Real(v) => format!("{v:.3}"),
            Cell::Count(n) => n.to_string(),
        }
    }
}

impl Table<'_> {
    pub fn csv(&self) -> String {
        let values: Vec<String> = self.values.iter().map(Cell::csv).collect();
        format!("{}\n{}\n", self.columns.join(","), values.join(","))
    }

    pub fn markdown(&self) -> String {
        let mut header = vec!["lang"];
        header.extend_from_slice(self.columns);
        let rule = vec!["---"; header.len()];
        let mut row = vec![self.lang.to_owned()];
        row.extend(self.values.iter().map(Cell::md));
        format!(
            "| {} |\n| {} |\n| {} |\n",
            header.join(" | "),
            rule.join(" | "),
            row.join(" | ")
        )
    }
}

pub fn render(format: Format, json: &impl Serialize, table: &Table<'_>) -> String {
    match format {
        Format::Json => format!("{}\n", serde_json::to_string(json).expect("reports serialize")),
        Format::Csv => table.csv(),
        Format::Md => table.markdown(),
    }
}
