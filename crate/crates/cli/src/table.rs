use std::path::Path;

use crate::error::CliError;

/// A CSV table kept in memory until every output is ready.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    /// Header with a coordinate block `prefix0..prefix{d-1}` after the `before` columns.
    pub fn with_coords(name: &str, before: &[&str], prefix: &str, d: usize, after: &[&str]) -> Self {
        let mut header: Vec<String> = before.iter().map(|s| s.to_string()).collect();
        header.extend((0..d).map(|i| format!("{prefix}{i}")));
        header.extend(after.iter().map(|s| s.to_string()));
        Table {
            name: name.into(),
            header,
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| num(*v)).collect());
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// Shortest round-trip form, scientific outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_columns() {
        let mut t = Table::with_coords("t", &["a"], "x", 2, &["b"]);
        assert_eq!(t.header, ["a", "x0", "x1", "b"]);
        t.push_nums(&[1.0, 0.5, -2.0, 1e-300]);
        assert_eq!(t.to_csv().unwrap(), "a,x0,x1,b\n1,0.5,-2,1e-300\n");
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.0, -2.5e-7, 3.0e20, 0.1 + 0.2, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::NAN), "NaN");
    }
}
