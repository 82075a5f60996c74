use std::io::{self, Write};

/// Nine significant digits in scientific notation.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

/// A header plus rows of already formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn write_to(&self, w: impl Write) -> io::Result<()> {
        let mut out = ::csv::WriterBuilder::new().flexible(true).from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()
    }
}

impl std::fmt::Display for CsvTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|_| std::fmt::Error)?;
        f.write_str(std::str::from_utf8(&buf).map_err(|_| std::fmt::Error)?)
    }
}

/// Table with an integer step column followed by float columns of equal
/// length.
pub fn write_columns(step_name: &str, steps: &[u64], columns: &[(String, &[f64])]) -> CsvTable {
    let mut header = vec![step_name.to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    let rows = steps
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![t.to_string()];
            row.extend(columns.iter().map(|(_, c)| fmt_float(c[i])));
            row
        })
        .collect();
    CsvTable { header, rows }
}
