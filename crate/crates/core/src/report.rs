//! Plain result tables, rendered either as aligned text or as CSV.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TableFormat {
    #[default]
    Text,
    Csv,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown table format `{other}` (expected text or csv)")),
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Text => "text",
            Self::Csv => "csv",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: TableFormat, w: impl Write) -> io::Result<()> {
        match format {
            TableFormat::Text => self.write_text(w),
            TableFormat::Csv => self.write_csv(w),
        }
    }

    pub fn render(&self, format: TableFormat) -> String {
        let mut buf = Vec::new();
        self.write(format, &mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("tables are UTF-8")
    }

    /// First column left-aligned, the others right-aligned.
    fn write_text(&self, mut w: impl Write) -> io::Result<()> {
        let mut width: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (c, cell) in row.iter().enumerate() {
                width[c] = width[c].max(cell.chars().count());
            }
        }
        let line = |w: &mut dyn Write, cells: &[String]| -> io::Result<()> {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(c, cell)| if c == 0 { format!("{cell:<0$}", width[c]) } else { format!("{cell:>0$}", width[c]) })
                .collect();
            writeln!(w, "{}", parts.join("  ").trim_end())
        };
        line(&mut w, &self.header)?;
        let rule: Vec<String> = width.iter().map(|&n| "-".repeat(n)).collect();
        writeln!(w, "{}", rule.join("  "))?;
        for row in &self.rows {
            line(&mut w, row)?;
        }
        Ok(())
    }

    fn write_csv(&self, w: impl Write) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row)?;
        }
        out.flush()
    }
}

/// Formats an optional number with fixed precision, `-` when absent.
pub fn opt_num(v: Option<f64>, prec: usize) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.prec$}"),
        Some(_) => "inf".into(),
        None => "-".into(),
    }
}
