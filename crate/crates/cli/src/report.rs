//! Tabular output shared by every subcommand.
//!
//! A [`Report`] is a column-ordered table plus a sorted metadata map. CSV
//! rendering emits the table only; JSON rendering wraps both in a single
//! object. All numeric formatting funnels through [`sig6`] so that repeated
//! invocations produce byte-identical output.

use std::collections::BTreeMap;

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => sig6(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Column-ordered result table with key/value metadata.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub metadata: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Report {
            metadata: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Formats a float with six significant digits.
///
/// Values whose rounded magnitude falls in [1e-5, 1e6) are rendered as plain
/// decimals; anything outside that range uses scientific notation. The
/// exponent is taken from the already-rounded scientific form so that values
/// sitting on a power-of-ten boundary (999.9995 and friends) do not pick up
/// a stray seventh digit.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci
        .split_once('e')
        .map(|(_, e)| e.parse().unwrap_or(0))
        .unwrap_or(0);
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Renders the table part of a report as CSV (metadata is JSON-only).
pub fn render_csv(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(
        &report
            .columns
            .iter()
            .map(|c| csv_quote(c))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for row in &report.rows {
        let line = row
            .iter()
            .map(|c| csv_quote(&c.render()))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

fn json_value(cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) if v.is_finite() => sig6(*v),
        Cell::Float(v) => format!("\"{}\"", json_escape(&v.to_string())),
        Cell::Text(s) => format!("\"{}\"", json_escape(s)),
    }
}

/// Renders metadata and rows as one JSON object.
///
/// Row objects list their keys in sorted order, independent of column order,
/// so the byte stream depends only on the report contents.
pub fn render_json(report: &Report) -> String {
    let mut out = String::from("{\n  \"metadata\": {");
    let meta: Vec<String> = report
        .metadata
        .iter()
        .map(|(k, v)| format!("\"{}\": \"{}\"", json_escape(k), json_escape(v)))
        .collect();
    if meta.is_empty() {
        out.push_str("},\n");
    } else {
        out.push_str("\n    ");
        out.push_str(&meta.join(",\n    "));
        out.push_str("\n  },\n");
    }
    out.push_str("  \"rows\": [");
    if report.rows.is_empty() {
        out.push_str("]\n}\n");
        return out;
    }
    let mut order: Vec<usize> = (0..report.columns.len()).collect();
    order.sort_by(|&a, &b| report.columns[a].cmp(&report.columns[b]));
    let rendered: Vec<String> = report
        .rows
        .iter()
        .map(|row| {
            let fields: Vec<String> = order
                .iter()
                .map(|&i| {
                    format!(
                        "\"{}\": {}",
                        json_escape(&report.columns[i]),
                        json_value(&row[i])
                    )
                })
                .collect();
            format!("{{{}}}", fields.join(", "))
        })
        .collect();
    out.push_str("\n    ");
    out.push_str(&rendered.join(",\n    "));
    out.push_str("\n  ]\n}\n");
    out
}
