//! On-disk formats.
//!
//! * Casorati matrix: one ASCII line `DYNOCT-CASORATI v1 nx=<n> nt=<n> grid=<rows>x<cols>` then
//!   `nx * nt` little-endian `f64`, row-major.
//! * Collagen field: one ASCII line `DYNOCT-FIELD v1 nx=<n> nz=<n>` then `nx * nz` little-endian
//!   `f64`, pixel-major.
//! * Maps: CSV with one line per grid row, `,` separator, `.` decimal, LF endings.
//! * Intensity image: binary 16-bit PGM (P5, maxval 65535, big-endian samples), values min-max
//!   mapped to `[0, 65535]` with round-half-up.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::medium::PixelGrid;
use crate::separation::CasoratiMatrix;

pub const CASORATI_MAGIC: &str = "DYNOCT-CASORATI";
pub const FIELD_MAGIC: &str = "DYNOCT-FIELD";

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn push_f64s(out: &mut Vec<u8>, values: impl Iterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn split_header<'a>(path: &Path, bytes: &'a [u8]) -> Result<(&'a str, &'a [u8])> {
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| format_err(path, "missing header line"))?;
    let header =
        std::str::from_utf8(&bytes[..nl]).map_err(|_| format_err(path, "header is not ASCII"))?;
    Ok((header, &bytes[nl + 1..]))
}

fn header_value<'a>(path: &Path, tokens: &[&'a str], key: &str) -> Result<&'a str> {
    tokens
        .iter()
        .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| format_err(path, format!("header lacks `{key}=`")))
}

fn parse_count(path: &Path, s: &str) -> Result<usize> {
    s.parse().map_err(|_| format_err(path, format!("bad count `{s}`")))
}

fn read_f64s(path: &Path, body: &[u8], count: usize) -> Result<Vec<f64>> {
    if body.len() != count * 8 {
        return Err(format_err(
            path,
            format!("expected {} payload bytes, found {}", count * 8, body.len()),
        ));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn encode_casorati(a: &CasoratiMatrix) -> Vec<u8> {
    let (nx, nt) = (a.n_pixels(), a.n_times());
    let g = a.grid();
    let mut out =
        format!("{CASORATI_MAGIC} v1 nx={nx} nt={nt} grid={}x{}\n", g.rows(), g.cols()).into_bytes();
    out.reserve(nx * nt * 8);
    let data = a.data();
    push_f64s(&mut out, (0..nx).flat_map(|j| (0..nt).map(move |k| data[(j, k)])));
    out
}

pub fn write_casorati(path: &Path, a: &CasoratiMatrix) -> Result<()> {
    write_bytes(path, &encode_casorati(a))
}

pub fn read_casorati(path: &Path) -> Result<CasoratiMatrix> {
    let bytes = read_bytes(path)?;
    let (header, body) = split_header(path, &bytes)?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&CASORATI_MAGIC) || tokens.get(1) != Some(&"v1") {
        return Err(format_err(path, "not a DYNOCT-CASORATI v1 file"));
    }
    let nx = parse_count(path, header_value(path, &tokens, "nx")?)?;
    let nt = parse_count(path, header_value(path, &tokens, "nt")?)?;
    let grid_spec = header_value(path, &tokens, "grid")?;
    let (rows, cols) = grid_spec
        .split_once('x')
        .ok_or_else(|| format_err(path, format!("bad grid `{grid_spec}`")))?;
    let grid = PixelGrid::new(parse_count(path, rows)?, parse_count(path, cols)?)
        .map_err(|e| format_err(path, e.to_string()))?;
    if grid.len() != nx {
        return Err(format_err(path, format!("grid {grid_spec} does not hold nx={nx} pixels")));
    }
    let values = read_f64s(path, body, nx * nt)?;
    CasoratiMatrix::new(DMatrix::from_row_slice(nx, nt, &values), grid)
        .map_err(|e| format_err(path, e.to_string()))
}

pub fn encode_field(nx: usize, nz: usize, samples: &[f64]) -> Vec<u8> {
    let mut out = format!("{FIELD_MAGIC} v1 nx={nx} nz={nz}\n").into_bytes();
    push_f64s(&mut out, samples.iter().copied());
    out
}

/// Reads a field file as `(nx, nz, samples)`.
pub fn read_field(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = read_bytes(path)?;
    let (header, body) = split_header(path, &bytes)?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&FIELD_MAGIC) || tokens.get(1) != Some(&"v1") {
        return Err(format_err(path, "not a DYNOCT-FIELD v1 file"));
    }
    let nx = parse_count(path, header_value(path, &tokens, "nx")?)?;
    let nz = parse_count(path, header_value(path, &tokens, "nz")?)?;
    Ok((nx, nz, read_f64s(path, body, nx * nz)?))
}

/// One CSV line per grid row.
pub fn encode_map_csv(grid: PixelGrid, values: &[f64]) -> String {
    let mut out = String::new();
    for r in 0..grid.rows() {
        let row: Vec<String> =
            (0..grid.cols()).map(|c| values[grid.flatten(r, c)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_map_csv(path: &Path, text: &str) -> Result<(PixelGrid, Vec<f64>)> {
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format_err(path, format!("line {}: {e}", n + 1)))?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(format_err(path, format!("line {} has {} columns", n + 1, row.len())));
        }
        values.extend(row);
        rows += 1;
    }
    let grid = PixelGrid::new(rows, cols.unwrap_or(0)).map_err(|e| format_err(path, e.to_string()))?;
    Ok((grid, values))
}

pub fn read_map_csv(path: &Path) -> Result<(PixelGrid, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_map_csv(path, &text)
}

/// Binary 16-bit PGM; a constant map encodes as all zeros.
pub fn encode_pgm16(grid: PixelGrid, values: &[f64]) -> Vec<u8> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n65535\n", grid.cols(), grid.rows()).into_bytes();
    for v in values {
        let level = if span > 0.0 { ((v - lo) / span * 65535.0 + 0.5).floor() } else { 0.0 };
        out.extend_from_slice(&(level.clamp(0.0, 65535.0) as u16).to_be_bytes());
    }
    out
}

/// Two-column table with a header line; indices start at 1.
pub fn encode_indexed_column(name: &str, values: &[f64]) -> String {
    let mut out = format!("index,{name}\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn casorati_header_is_exact() {
        let grid = PixelGrid::new(1, 2).unwrap();
        let a = CasoratiMatrix::new(DMatrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.]), grid)
            .unwrap();
        let bytes = encode_casorati(&a);
        let header = b"DYNOCT-CASORATI v1 nx=2 nt=3 grid=1x2\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 48);
        // row-major: second value is A[0,1] = 2.0
        assert_eq!(&bytes[header.len() + 8..header.len() + 16], &2.0f64.to_le_bytes());
    }

    #[test]
    fn casorati_rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.cas");
        std::fs::write(&p, b"DYNOCT-CASORATI v1 nx=1 nt=2 grid=1x1\n\0\0\0").unwrap();
        assert!(matches!(read_casorati(&p), Err(Error::Format { .. })));
        std::fs::write(&p, b"SOMETHING ELSE\n").unwrap();
        assert!(read_casorati(&p).is_err());
    }

    #[test]
    fn field_header() {
        let bytes = encode_field(2, 3, &[0.0; 6]);
        assert!(bytes.starts_with(b"DYNOCT-FIELD v1 nx=2 nz=3\n"));
    }

    #[test]
    fn pgm_normalization_is_bit_exact() {
        let grid = PixelGrid::new(1, 4).unwrap();
        let bytes = encode_pgm16(grid, &[1.0, 3.0, 2.0, 1.5]);
        let header = b"P5\n4 1\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let px: Vec<u16> = bytes[header.len()..]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        // 0.5 * 65535 = 32767.5 rounds up; 0.25 * 65535 = 16383.75
        assert_eq!(px, vec![0, 65535, 32768, 16384]);
        let flat = encode_pgm16(grid, &[2.0; 4]);
        assert!(flat[header.len()..].iter().all(|b| *b == 0));
    }

    #[test]
    fn csv_layout() {
        let grid = PixelGrid::new(2, 3).unwrap();
        let text = encode_map_csv(grid, &[0.0, 1.5, 2.0, 3.0, 4.25, 5.0]);
        assert_eq!(text, "0,1.5,2\n3,4.25,5\n");
        assert_eq!(encode_indexed_column("sigma", &[3.0, 0.5]), "index,sigma\n1,3\n2,0.5\n");
        let p = Path::new("x.csv");
        assert!(parse_map_csv(p, "1,2\n3\n").is_err());
        assert!(parse_map_csv(p, "1,a\n").is_err());
    }

    proptest! {
        #[test]
        fn casorati_round_trip(rows in 1usize..4, cols in 1usize..4, nt in 1usize..6,
                               seed in any::<u64>()) {
            let grid = PixelGrid::new(rows, cols).unwrap();
            let mut x = seed;
            let m = DMatrix::from_fn(grid.len(), nt, |_, _| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (x >> 11) as f64 / (1u64 << 53) as f64 * 2e3 - 1e3
            });
            let a = CasoratiMatrix::new(m, grid).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("a.cas");
            write_casorati(&p, &a).unwrap();
            prop_assert_eq!(read_casorati(&p).unwrap(), a);
        }

        #[test]
        fn map_csv_round_trip(values in proptest::collection::vec(0.0f64..1e6, 6)) {
            let grid = PixelGrid::new(3, 2).unwrap();
            let text = encode_map_csv(grid, &values);
            let (g, back) = parse_map_csv(Path::new("m.csv"), &text).unwrap();
            prop_assert_eq!(g, grid);
            prop_assert_eq!(back, values);
        }
    }
}
