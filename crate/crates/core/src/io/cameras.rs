//! Camera file: one projection per line, 12 row-major values.
//!
//! Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, write_atomic};
use crate::error::{Error, Result};
use crate::geom::Projection;

pub fn parse_cameras(text: &str, path: &Path) -> Result<Vec<Projection>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, n + 1, format!("bad camera value: {e}")))?;
        let arr: [f64; 12] = values
            .try_into()
            .map_err(|v: Vec<f64>| Error::parse(path, n + 1, format!("expected 12 values, found {}", v.len())))?;
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, n + 1, "camera values must be finite"));
        }
        out.push(Projection::from_row_slice(&arr));
    }
    Ok(out)
}

pub fn read_cameras(path: &Path) -> Result<Vec<Projection>> {
    parse_cameras(&read_text(path)?, path)
}

pub fn format_cameras(cameras: &[Projection]) -> String {
    let mut out = String::new();
    for cam in cameras {
        let row: Vec<String> = cam.to_row_array().iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_cameras(path: &Path, cameras: &[Projection]) -> Result<()> {
    write_atomic(path, format_cameras(cameras).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3x4;

    #[test]
    fn parses_and_round_trips() {
        let cam = Projection(Matrix3x4::new(
            700.0, 0.0, 255.5, 1.0, 0.0, 700.0, 255.5, -2.0, 0.0, 0.0, 1.0, 3.0,
        ));
        let text = format!("# header\n\n{}", format_cameras(&[cam, cam]));
        let parsed = parse_cameras(&text, Path::new("c.txt")).unwrap();
        assert_eq!(parsed, vec![cam, cam]);
    }

    #[test]
    fn wrong_count_reports_line() {
        let err = parse_cameras("1 2 3\n", Path::new("c.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(parse_cameras("1 2 3 4 5 6 7 8 9 10 11 z\n", Path::new("c")).is_err());
        assert!(parse_cameras("1 2 3 4 5 6 7 8 9 10 11 inf\n", Path::new("c")).is_err());
    }
}
