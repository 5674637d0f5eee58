//! File formats: the GRF1 binary raster, plain CSV grids and the run manifest.
//!
//! GRF1 layout: the magic `b"GRF1"`, `rows` and `cols` as little-endian `u32`,
//! `dx` and `dy` as little-endian `f64`, then `rows * cols` little-endian `f64`
//! values in row-major order. Nothing follows the payload.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FieldGrid;

pub const GRF1_MAGIC: &[u8; 4] = b"GRF1";
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

/// Encodes a grid as GRF1 bytes.
pub fn encode_grf1(grid: &FieldGrid) -> Result<Vec<u8>> {
    let rows = u32::try_from(grid.rows()).map_err(|_| Error::Format("too many rows for GRF1".into()))?;
    let cols = u32::try_from(grid.cols()).map_err(|_| Error::Format("too many columns for GRF1".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + grid.values().len() * 8);
    out.extend_from_slice(GRF1_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&grid.dx.to_le_bytes());
    out.extend_from_slice(&grid.dy.to_le_bytes());
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes GRF1 bytes, rejecting short or trailing payloads and non-finite values.
pub fn decode_grf1(bytes: &[u8]) -> Result<FieldGrid> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != GRF1_MAGIC {
        return Err(Error::Format("missing GRF1 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let rows = u32_at(4);
    let cols = u32_at(8);
    let dx = f64_at(12);
    let dy = f64_at(20);
    let n = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("GRF1 dimensions overflow".into()))?;
    if bytes.len() - HEADER_LEN != n {
        return Err(Error::Format(format!(
            "GRF1 payload holds {} bytes, expected {n} for {rows}x{cols}",
            bytes.len() - HEADER_LEN
        )));
    }
    let values: Vec<f64> =
        bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format(format!("non-finite value at index {k}")));
    }
    FieldGrid::new(rows, cols, values, dx, dy).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_grf1(path: impl AsRef<Path>, grid: &FieldGrid) -> Result<()> {
    let bytes = encode_grf1(grid)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_grf1(path: impl AsRef<Path>) -> Result<FieldGrid> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_grf1(&bytes)
}

/// Writes one grid row per line, values separated by commas.
pub fn write_csv_grid(path: impl AsRef<Path>, grid: &FieldGrid) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for row in grid.values().chunks(grid.cols()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Parses a CSV grid from a reader. Blank lines are skipped; all rows must
/// have the same length.
pub fn parse_csv_grid(reader: impl BufRead, dx: f64, dy: f64) -> Result<FieldGrid> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Format(format!("line {}: bad value {t:?}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Format(format!("line {}: {} values, expected {c}", lineno + 1, row.len())))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format("empty CSV grid".into()))?;
    FieldGrid::new(rows, cols, values, dx, dy)
}

pub fn read_csv_grid(path: impl AsRef<Path>, dx: f64, dy: f64) -> Result<FieldGrid> {
    parse_csv_grid(BufReader::new(fs::File::open(path)?), dx, dy)
}

/// Everything needed to repeat a command-line run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, to_json_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Pretty JSON with a trailing newline. Floats use the shortest representation
/// that parses back to the same bits.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
