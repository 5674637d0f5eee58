//! Loading rasters from GRF1, CSV and 8-bit grayscale images.

use std::path::Path;

use aniso_core::io::{read_csv_grid, read_grf1};
use aniso_core::{BinaryMask, Error, FieldGrid, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Auto,
    Grf1,
    Csv,
    Image,
}

fn detect(path: &Path) -> InputFormat {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") | Some("txt") => InputFormat::Csv,
        Some("png") | Some("pgm") | Some("pnm") => InputFormat::Image,
        _ => InputFormat::Grf1,
    }
}

/// Reads a field. GRF1 carries its own spacing; CSV and images use `(dx, dy)`.
/// Image rows are flipped so the first image row is the top of the window.
pub fn load_field(path: &Path, format: InputFormat, dx: f64, dy: f64) -> Result<FieldGrid> {
    let format = if format == InputFormat::Auto { detect(path) } else { format };
    match format {
        InputFormat::Grf1 | InputFormat::Auto => read_grf1(path),
        InputFormat::Csv => read_csv_grid(path, dx, dy),
        InputFormat::Image => {
            let img = image::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?.into_luma8();
            let (cols, rows) = (img.width() as usize, img.height() as usize);
            let raw = img.into_raw();
            let mut values = Vec::with_capacity(rows * cols);
            for i in (0..rows).rev() {
                values.extend(raw[i * cols..(i + 1) * cols].iter().map(|&p| p as f64));
            }
            FieldGrid::new(rows, cols, values, dx, dy)
        }
    }
}

/// Binary reading of a raster: non-zero pixels belong to the excursion set.
pub fn to_mask(grid: &FieldGrid) -> Result<BinaryMask> {
    let data = grid.values().iter().map(|&v| v != 0.0).collect();
    BinaryMask::new(grid.rows(), grid.cols(), data, grid.dx, grid.dy)
}
