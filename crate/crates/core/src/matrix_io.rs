//! Plain-text complex matrix files.
//!
//! One matrix row per line, entries separated by whitespace, each entry written as
//! `a+bi` (also accepted: `a-bi`, a bare real `a`, a bare imaginary `bi`). Blank lines
//! and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:e}{}{:e}i", z.re, sign, z.im.abs())
}

pub fn parse_complex(token: &str) -> std::result::Result<C64, String> {
    let s = token.trim();
    if s.is_empty() {
        return Err("empty entry".into());
    }
    let Some(body) = s.strip_suffix('i').or_else(|| s.strip_suffix('j')) else {
        return s
            .parse::<f64>()
            .map(|re| C64::new(re, 0.0))
            .map_err(|e| format!("bad real entry {s:?}: {e}"));
    };
    // split point: last '+' or '-' not at the start and not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let parse_im = |t: &str| -> std::result::Result<f64, String> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|e| format!("bad imaginary part {t:?}: {e}")),
        }
    };
    match split {
        Some(i) => {
            let re = body[..i]
                .parse::<f64>()
                .map_err(|e| format!("bad real part {:?}: {e}", &body[..i]))?;
            Ok(C64::new(re, parse_im(&body[i..])?))
        }
        None => Ok(C64::new(0.0, parse_im(body)?)),
    }
}

pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(parse_complex)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|msg| Error::Parse { line: idx + 1, msg })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {} entries, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(CMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|c| format_complex(m[(r, c)])).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<CMatrix> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &CMatrix) -> Result<()> {
    fs::write(path, format_matrix(m))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(parse_complex("1+2i").unwrap(), C64::new(1.0, 2.0));
        assert_eq!(parse_complex("-1.5-2i").unwrap(), C64::new(-1.5, -2.0));
        assert_eq!(parse_complex("3").unwrap(), C64::new(3.0, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("2.5i").unwrap(), C64::new(0.0, 2.5));
        assert_eq!(parse_complex("1e-3+4.5e2i").unwrap(), C64::new(1e-3, 450.0));
        assert_eq!(parse_complex("1E+2-1e-2i").unwrap(), C64::new(100.0, -0.01));
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("1+xi").is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = parse_matrix("1 2\n3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let m = parse_matrix("# header\n\n1+0i 0+1i\n0-1i 1\n").unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m[(1, 0)], C64::new(0.0, -1.0));
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(entries in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..12), cols in 1usize..4) {
            let rows = entries.len().div_ceil(cols);
            let m = CMatrix::from_fn(rows, cols, |r, c| {
                let (a, b) = entries[(r * cols + c) % entries.len()];
                C64::new(a, b)
            });
            let back = parse_matrix(&format_matrix(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
