use std::io::Write;
use std::path::Path;

use super::ExperimentError;

/// One CSV cell. `Null` is written as an empty field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Scientific notation with `digits` significant digits.
pub fn format_float(v: f64, digits: usize) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{:.*e}", digits.saturating_sub(1), v)
    }
}

/// A CSV file under construction: `#` comment lines, a header and rows.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub meta: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { meta: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Add comment lines; embedded newlines start new comment lines.
    pub fn note(&mut self, text: impl AsRef<str>) -> &mut Self {
        self.meta.extend(text.as_ref().lines().map(str::to_string));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self, digits: usize) -> Result<Vec<u8>, ExperimentError> {
        let mut buf = Vec::new();
        for line in &self.meta {
            if line.is_empty() {
                buf.extend_from_slice(b"#\n");
            } else {
                writeln!(buf, "# {line}").expect("writing to a Vec cannot fail");
            }
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Float(v) => format_float(*v, digits),
                Cell::Int(v) => v.to_string(),
                Cell::Text(s) => s.clone(),
                Cell::Bool(b) => b.to_string(),
                Cell::Null => String::new(),
            }))
            .map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| ExperimentError::Io(e.to_string()))
    }

    pub fn write(&self, path: &Path, digits: usize) -> Result<(), ExperimentError> {
        let bytes = self.to_bytes(digits)?;
        std::fs::write(path, bytes).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
    }
}

fn csv_err(e: csv::Error) -> ExperimentError {
    ExperimentError::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 2.2, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            let s = format_float(v, 17);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_float(0.25, 3), "2.50e-1");
    }

    #[test]
    fn layout() {
        let mut t = CsvTable::new(&["x", "u", "flag"]);
        t.note("a = 1\n\nb = \"two\"");
        t.push(vec![0.5.into(), Cell::Null, true.into()]);
        t.push(vec![(-1.0).into(), 2.0.into(), false.into()]);
        let text = String::from_utf8(t.to_bytes(3).unwrap()).unwrap();
        assert_eq!(text, "# a = 1\n#\n# b = \"two\"\nx,u,flag\n5.00e-1,,true\n-1.00e0,2.00e0,false\n");
    }
}
