//! CSV emission with deterministic formatting: comma separators, header row,
//! LF line endings, '.' decimal point, 17 significant digits.

use crate::kernels::KernelSpec;
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

/// 17-significant-digit scientific form, round-trip exact.
pub fn fmt17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{:.16e}", x)
}

pub fn write_csv<P: AsRef<Path>>(path: P, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt17(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Two-column CSV (t, value) for table-defined kernels.
pub fn write_kernel_table<P: AsRef<Path>>(path: P, kernel: &KernelSpec) -> Result<()> {
    match kernel {
        KernelSpec::TableDefined { grid, values } => {
            let rows: Vec<Vec<f64>> = grid.iter().zip(values).map(|(t, v)| vec![*t, *v]).collect();
            write_csv(path, &["t", "value"], &rows)
        }
        _ => Err(Error::InvalidParams(
            "only table-defined kernels round-trip through CSV".into(),
        )),
    }
}

pub fn read_kernel_table<P: AsRef<Path>>(path: P) -> Result<KernelSpec> {
    let text = std::fs::read_to_string(path)?;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let t: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidParams(format!("bad CSV line {}", i + 1)))?;
        let v: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidParams(format!("bad CSV line {}", i + 1)))?;
        grid.push(t);
        values.push(v);
    }
    let spec = KernelSpec::TableDefined { grid, values };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt17_round_trips() {
        for &x in &[1.0, -3.5e-7, std::f64::consts::PI, 1.0 / 3.0, 2.2e300] {
            let s = fmt17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
    }

    #[test]
    fn kernel_table_csv_roundtrip() {
        let dir = std::env::temp_dir().join("volterra_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("k.csv");
        let k = KernelSpec::TableDefined {
            grid: vec![0.0, 0.5, 1.25],
            values: vec![2.0, 1.0 / 3.0, -0.25],
        };
        write_kernel_table(&path, &k).unwrap();
        let back = read_kernel_table(&path).unwrap();
        assert_eq!(k, back);
    }
}
