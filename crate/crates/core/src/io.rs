//! CSV and JSON writers for the exported artifacts.
//!
//! Numbers are written with 17 significant digits so they round-trip.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Round-trip formatting of one number.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders a CSV table. `echo` lines are written first as `# ...` comments.
pub fn csv_string(echo: &[String], header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for line in echo {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, echo: &[String], header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_text(path, &csv_string(echo, header, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("cannot serialize {}: {e}", path.display())))?;
    s.push('\n');
    write_text(path, &s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .map_err(|e| Error::invalid(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let s = csv_string(&["k=1".into()], &["a", "b"], &[vec![0.1, -2.0]]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# k=1");
        assert_eq!(lines[1], "a,b");
        let back: Vec<f64> = lines[2].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(back, vec![0.1, -2.0]);
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [1.0 / 3.0, std::f64::consts::PI * 1e-300, -6.02214076e23] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }
}
