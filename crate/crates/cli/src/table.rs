//! CSV tables: `#` metadata lines, one header row, fixed 17-significant-digit
//! scientific notation (locale independent), empty cells for missing values.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

pub const TOOL: &str = concat!("dpsense ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Empty,
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl Cell {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(x),
            Cell::Int(i) => Some(i as f64),
            Cell::Empty => None,
        }
    }
}

/// 17 significant digits; non-finite values become empty cells.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Table with the standard tool / config-hash / tier metadata.
    pub fn new(config_hash: &str, tier: &str, headers: Vec<String>) -> Self {
        let meta = vec![
            ("tool".to_string(), TOOL.to_string()),
            ("config_sha256".to_string(), config_hash.to_string()),
            ("model_tier".to_string(), tier.to_string()),
        ];
        Self { meta, headers, rows: Vec::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s.push_str(&self.headers.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match *c {
                    Cell::Num(x) => format_f64(x),
                    Cell::Int(i) => i.to_string(),
                    Cell::Empty => String::new(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(self.render().as_bytes())
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(-2.5), "-2.5000000000000000e0");
        assert_eq!(format_f64(f64::NAN), "");
        let x = 0.123456789012345678f64;
        assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn empty_cells_not_zero() {
        let mut t = Table::new("abc", "closed_form", vec!["chi".into(), "x_mean".into()]);
        t.rows.push(vec![Cell::Num(0.5), Cell::Empty]);
        let text = t.render();
        assert!(text.starts_with("# tool: dpsense "));
        assert!(text.contains("# config_sha256: abc\n# model_tier: closed_form\nchi,x_mean\n"));
        assert!(text.ends_with("5.0000000000000000e-1,\n"));
        assert_eq!(t.column("x_mean").unwrap(), vec![None]);
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
