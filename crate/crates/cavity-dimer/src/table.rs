//! Byte-stable CSV output: unit-bearing header, 17 significant digits,
//! LF line endings, and no silent NaN.

use std::path::Path;

use crate::AppError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    /// Written as an empty field (e.g. a sweep point without a well).
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

/// Shortest exact-round-trip form is not byte-stable across formatters, so
/// every number gets exactly 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        self.rows
            .iter()
            .map(|r| match &r[j] {
                Cell::Num(v) => Some(*v),
                Cell::Int(v) => Some(*v as f64),
                _ => None,
            })
            .collect()
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>, AppError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| AppError::Io(e.to_string()))?;
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.header.len() {
                return Err(AppError::Io(format!("row {i} has {} fields, header has {}", row.len(), self.header.len())));
            }
            let mut fields = Vec::with_capacity(row.len());
            for (j, c) in row.iter().enumerate() {
                fields.push(match c {
                    Cell::Num(v) if !v.is_finite() => {
                        return Err(AppError::NonFinite { column: self.header[j].clone(), row: i });
                    }
                    Cell::Num(v) => format_number(*v),
                    Cell::Int(v) => v.to_string(),
                    Cell::Text(s) => s.clone(),
                    Cell::Missing => String::new(),
                });
            }
            w.write_record(&fields).map_err(|e| AppError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| AppError::Io(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<Vec<u8>, AppError> {
        let bytes = self.to_csv_bytes()?;
        std::fs::write(path, &bytes).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
        Ok(bytes)
    }

    /// Parses a numeric CSV produced by [`Table::write_csv`].
    pub fn read_numeric_csv(path: &Path) -> Result<Self, AppError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
        let header = r.headers().map_err(|e| AppError::Io(e.to_string()))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| AppError::Io(e.to_string()))?;
            rows.push(
                rec.iter()
                    .map(|f| {
                        if f.is_empty() {
                            Ok(Cell::Missing)
                        } else {
                            f.parse::<f64>().map(Cell::Num).map_err(|_| AppError::Io(format!("not a number: `{f}`")))
                        }
                    })
                    .collect::<Result<_, _>>()?,
            );
        }
        Ok(Self { header, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(&["R_a0", "omega2_MHz"]);
        assert_eq!(t.to_csv_bytes().unwrap(), b"R_a0,omega2_MHz\n");
    }

    #[test]
    fn nan_is_refused() {
        let mut t = Table::new(&["x"]);
        t.push(vec![Cell::Num(f64::NAN)]);
        assert!(matches!(t.to_csv_bytes(), Err(AppError::NonFinite { .. })));
    }

    #[test]
    fn values_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let vals = [0.1, -1.0 / 3.0, 6.000_523_803_311_718e18, 5e-324, f64::MAX / 8.0, -0.0, 1.0];
        let mut t = Table::new(&["a", "b"]);
        for v in vals {
            t.push(vec![Cell::Num(v), Cell::Num(v * 7.0 / 3.0)]);
        }
        t.write_csv(&path).unwrap();
        let back = Table::read_numeric_csv(&path).unwrap();
        assert_eq!(back.header, t.header);
        for (a, b) in back.rows.iter().zip(&t.rows) {
            assert_eq!(a, b);
        }
        assert!(!std::fs::read(&path).unwrap().contains(&b'\r'));
    }
}
