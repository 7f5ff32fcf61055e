//! Report model shared by every output format. Commands build a `Report`;
//! the emitters only lay it out, so text, JSON and CSV carry the same cells.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::WorkbenchConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Table { title: title.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in table {:?}", self.title);
        self.rows.push(row);
    }

    /// Cell in the row whose first column is `key`.
    pub fn cell(&self, key: &str, column: &str) -> Option<&str> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r[0] == key).map(|r| r[c].as_str())
    }
}

/// A printed reference value that differs from the computed one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerNote {
    pub id: String,
    pub pair: String,
    pub cell: usize,
    pub printed: String,
    pub derived: String,
    pub source: String,
    pub justification: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    /// The effective configuration; feeding it back reproduces the report.
    pub config: WorkbenchConfig,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    pub ledger: Vec<LedgerNote>,
    /// Some result depends on a differential or extension that could not
    /// be settled.
    pub undetermined: bool,
    /// A self-check failed. Always a bug.
    pub internal_failures: Vec<String>,
}

impl Report {
    pub fn new(command: &str, config: WorkbenchConfig) -> Self {
        Report { command: command.into(), config, ..Default::default() }
    }

    pub fn table(&self, title: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.title == title)
    }

    pub fn render(&self, format: Format, quiet: bool) -> String {
        match format {
            Format::Text => self.to_text(quiet),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.for_output(quiet)).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => self.to_csv(quiet),
        }
    }

    fn for_output(&self, quiet: bool) -> Report {
        let mut r = self.clone();
        if quiet {
            r.ledger.clear();
        }
        r
    }

    pub fn to_text(&self, quiet: bool) -> String {
        let mut out = String::new();
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            write_text_table(&mut out, t);
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        if self.undetermined {
            out.push_str("note: some results are undetermined\n");
        }
        for f in &self.internal_failures {
            let _ = writeln!(out, "INTERNAL FAILURE: {f}");
        }
        if !quiet && !self.ledger.is_empty() {
            out.push_str("\ndeviation ledger\n");
            for l in &self.ledger {
                let _ = writeln!(
                    out,
                    "  {} {} cell {}: printed {}, derived {} [{}]\n    {}",
                    l.id, l.pair, l.cell, l.printed, l.derived, l.source, l.justification
                );
            }
        }
        out
    }

    pub fn to_csv(&self, quiet: bool) -> String {
        let mut out = Vec::new();
        let mut tables: Vec<Table> = self.tables.clone();
        if !quiet && !self.ledger.is_empty() {
            let mut t = Table::new(
                "deviation ledger",
                &["id", "pair", "cell", "printed", "derived", "source", "justification"],
            );
            for l in &self.ledger {
                t.push(vec![
                    l.id.clone(),
                    l.pair.clone(),
                    l.cell.to_string(),
                    l.printed.clone(),
                    l.derived.clone(),
                    l.source.clone(),
                    l.justification.clone(),
                ]);
            }
            tables.push(t);
        }
        for (i, t) in tables.iter().enumerate() {
            if i > 0 {
                out.push(b'\n');
            }
            out.extend_from_slice(format!("# {}\n", t.title).as_bytes());
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&t.columns).expect("in-memory csv");
            for r in &t.rows {
                w.write_record(r).expect("in-memory csv");
            }
            out.extend(w.into_inner().expect("in-memory csv"));
        }
        String::from_utf8(out).expect("csv is utf-8")
    }
}

fn write_text_table(out: &mut String, t: &Table) {
    let width = |c: usize| {
        t.rows.iter().map(|r| r[c].chars().count()).chain([t.columns[c].chars().count()]).max().unwrap_or(0)
    };
    let widths: Vec<usize> = (0..t.columns.len()).map(width).collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> =
            cells.iter().zip(&widths).map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        padded.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", t.title);
    let _ = writeln!(out, "{}", line(&t.columns));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for r in &t.rows {
        let _ = writeln!(out, "{}", line(r));
    }
}

/// Reads the tables back out of aligned text. Used to compare emitters.
pub fn parse_text_tables(text: &str) -> Vec<Table> {
    let mut tables = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i + 2 < lines.len() {
        let rule = lines[i + 2];
        if lines[i].is_empty() || rule.is_empty() || !rule.chars().all(|c| c == '-' || c == ' ') {
            i += 1;
            continue;
        }
        let widths: Vec<usize> = rule.split("  ").map(|s| s.chars().count()).collect();
        let split = |l: &str| -> Vec<String> {
            let chars: Vec<char> = l.chars().collect();
            let mut at = 0;
            widths
                .iter()
                .map(|w| {
                    let end = (at + w).min(chars.len());
                    let cell: String = chars[at.min(chars.len())..end].iter().collect();
                    at += w + 2;
                    cell.trim_end().to_string()
                })
                .collect()
        };
        let mut t = Table { title: lines[i].to_string(), columns: split(lines[i + 1]), rows: Vec::new() };
        i += 3;
        while i < lines.len() && !lines[i].is_empty() && !lines[i].starts_with("note:") {
            t.rows.push(split(lines[i]));
            i += 1;
        }
        tables.push(t);
    }
    tables
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("cohomology", WorkbenchConfig::default());
        let mut t = Table::new("groups", &["coefficients", "H^0", "H^1"]);
        t.push(vec!["Z".into(), "Z".into(), "Z^2 + Z/4".into()]);
        t.push(vec!["twisted".into(), "0".into(), "Z/4".into()]);
        r.tables.push(t);
        r
    }

    #[test]
    fn text_tables_parse_back() {
        let r = sample();
        assert_eq!(parse_text_tables(&r.to_text(true)), r.tables);
    }

    #[test]
    fn csv_quotes_nothing_for_plain_cells() {
        let csv = sample().to_csv(true);
        assert!(csv.starts_with("# groups\ncoefficients,H^0,H^1\nZ,Z,Z^2 + Z/4\n"), "{csv}");
    }
}
