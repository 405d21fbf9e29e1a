//! Magnitude image export with min-max windowing to 8-bit grayscale.
//! Pipelines write portable graymaps; `export-png` writes PNG.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use warpgrid::ComplexGrid;

/// Min-max windowed 8-bit magnitudes plus the 2D raster dimensions.
/// 3D grids export their central slice along the first axis.
fn windowed_bytes(grid: &ComplexGrid) -> Result<(Vec<u8>, usize, usize)> {
    let shape = grid.shape();
    let (rows, cols, slice): (usize, usize, &[num_complex::Complex64]) = match shape.len() {
        1 => (1, shape[0], grid.data()),
        2 => (shape[0], shape[1], grid.data()),
        3 => {
            let plane = shape[1] * shape[2];
            let mid = shape[0] / 2;
            (
                shape[1],
                shape[2],
                &grid.data()[mid * plane..(mid + 1) * plane],
            )
        }
        _ => bail!("image export supports 1 to 3 axes"),
    };
    let mags: Vec<f64> = slice.iter().map(|v| v.norm()).collect();
    let max = mags.iter().cloned().fold(0.0f64, f64::max);
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let span = max - min;
    let bytes = mags
        .iter()
        .map(|&m| {
            if span > 0.0 {
                ((m - min) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    Ok((bytes, rows, cols))
}

pub fn write_pgm(path: &Path, grid: &ComplexGrid) -> Result<()> {
    let (bytes, rows, cols) = windowed_bytes(grid)?;
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    write!(out, "P5\n{cols} {rows}\n255\n")?;
    out.write_all(&bytes)?;
    Ok(())
}

pub fn write_png(path: &Path, grid: &ComplexGrid) -> Result<()> {
    let (bytes, rows, cols) = windowed_bytes(grid)?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), cols as u32, rows as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use warpgrid::Space;

    #[test]
    fn constant_image_exports_uniform_pixels() {
        let grid = ComplexGrid::new(
            vec![4, 6],
            Space::Image,
            vec![Complex64::new(0.7, 0.0); 24],
        )
        .unwrap();
        let (bytes, rows, cols) = windowed_bytes(&grid).unwrap();
        assert_eq!((rows, cols), (4, 6));
        assert!(bytes.iter().all(|&b| b == bytes[0]));
    }

    #[test]
    fn pgm_and_png_files_are_written() {
        let dir = std::env::temp_dir().join(format!("warpgrid-img-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let grid = ComplexGrid::new(
            vec![4, 4],
            Space::Image,
            (0..16).map(|i| Complex64::new(i as f64, 0.0)).collect(),
        )
        .unwrap();
        let pgm = dir.join("x.pgm");
        let png_path = dir.join("x.png");
        write_pgm(&pgm, &grid).unwrap();
        write_png(&png_path, &grid).unwrap();
        let content = std::fs::read(&pgm).unwrap();
        assert!(content.starts_with(b"P5\n4 4\n255\n"));
        assert_eq!(content.len(), 11 + 16);
        assert!(std::fs::read(&png_path).unwrap().starts_with(&[0x89, b'P', b'N', b'G']));
    }
}
