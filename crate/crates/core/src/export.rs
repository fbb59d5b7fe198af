//! Image, CSV and point-cloud writers for reconstruction outputs.
//!
//! Images are written row-major (top row first) even though vectors are
//! column-stacked internally.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma};

use crate::error::{check_len, Error, Result};
use crate::grid::GridShape;

pub const PREVIEW_GAMMA: f64 = 2.2;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn quantize(v: f64, lo: f64, hi: f64, max: f64) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * max
    } else {
        0.0
    }
}

/// 16-bit grayscale PNG, linearly mapping `[lo, hi]` to `[0, 65535]`.
pub fn write_png16(path: &Path, shape: GridShape, image: &[f64], lo: f64, hi: f64) -> Result<()> {
    check_len("image pixels", shape.len(), image.len())?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(shape.cols() as u32, shape.rows() as u32, |c, r| {
            let v = image[shape.offset(r as usize, c as usize)];
            Luma([quantize(v, lo, hi, 65535.0).round() as u16])
        });
    buf.save(path).map_err(Error::from)
}

/// 16-bit PNG scaled to the image's own range.
pub fn write_intensity_png(path: &Path, shape: GridShape, image: &[f64]) -> Result<()> {
    let (lo, hi) = finite_range(image.iter().copied()).unwrap_or((0.0, 0.0));
    write_png16(path, shape, image, lo.min(0.0), hi)
}

/// 8-bit PNG of `(x / max)^(1/γ)`.
pub fn write_gamma_preview(path: &Path, shape: GridShape, image: &[f64], gamma: f64) -> Result<()> {
    check_len("image pixels", shape.len(), image.len())?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let peak = image.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let buf = GrayImage::from_fn(shape.cols() as u32, shape.rows() as u32, |c, r| {
        let v = image[shape.offset(r as usize, c as usize)];
        let unit = if peak > 0.0 { (v / peak).clamp(0.0, 1.0) } else { 0.0 };
        Luma([(unit.powf(1.0 / gamma) * 255.0).round() as u8])
    });
    buf.save(path).map_err(Error::from)
}

/// Depth map: invalid pixels are 0, valid depths map `[z_min, z_max]` onto
/// `[1, 65535]`.
pub fn write_depth_png(
    path: &Path,
    shape: GridShape,
    depth: &[Option<f64>],
    z_min: f64,
    z_max: f64,
) -> Result<()> {
    check_len("depth pixels", shape.len(), depth.len())?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(shape.cols() as u32, shape.rows() as u32, |c, r| {
            let level = match depth[shape.offset(r as usize, c as usize)] {
                Some(z) => 1.0 + quantize(z, z_min, z_max, 65534.0).round(),
                None => 0.0,
            };
            Luma([level as u16])
        });
    buf.save(path).map_err(Error::from)
}

/// Range of the valid depths, if any.
pub fn depth_range(depth: &[Option<f64>]) -> Option<(f64, f64)> {
    finite_range(depth.iter().flatten().copied())
}

/// `pixel,<name>` CSV with 1-based pixel indices.
pub fn write_vector_csv<W: Write>(w: W, name: &str, values: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["pixel", name])?;
    for (k, v) in values.iter().enumerate() {
        out.write_record([(k + 1).to_string(), v.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Several named vectors side by side.
pub fn write_vectors_csv<W: Write>(w: W, columns: &[(&str, &[f64])]) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.1.len());
    for (_, c) in columns {
        check_len("csv column", n, c.len())?;
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["pixel".to_string()];
    header.extend(columns.iter().map(|c| c.0.to_string()));
    out.write_record(&header)?;
    for k in 0..n {
        let mut row = vec![(k + 1).to_string()];
        row.extend(columns.iter().map(|c| c.1[k].to_string()));
        out.write_record(&row)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_vectors_csv(path: &Path, columns: &[(&str, &[f64])]) -> Result<()> {
    write_vectors_csv(create(path)?, columns)
}

/// `x y z` lines for valid pixels. `x` runs along columns and `y` down the
/// rows, both centred on the optical axis and in metres.
pub fn write_point_cloud<W: Write>(
    mut w: W,
    shape: GridShape,
    depth: &[Option<f64>],
    pixel_pitch: f64,
) -> Result<()> {
    check_len("depth pixels", shape.len(), depth.len())?;
    if !(pixel_pitch.is_finite() && pixel_pitch > 0.0) {
        return Err(Error::invalid("pixel pitch must be positive"));
    }
    let (r0, c0) = ((shape.rows() / 2) as f64, (shape.cols() / 2) as f64);
    let io = |e| Error::io("point cloud", e);
    writeln!(w, "# x_m y_m z_m").map_err(io)?;
    for (k, z) in depth.iter().enumerate() {
        if let Some(z) = z {
            let (r, c) = shape.coords(k);
            let x = (c as f64 - c0) * pixel_pitch;
            let y = (r as f64 - r0) * pixel_pitch;
            writeln!(w, "{x:.6} {y:.6} {z:.6}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn save_point_cloud(path: &Path, shape: GridShape, depth: &[Option<f64>], pixel_pitch: f64) -> Result<()> {
    write_point_cloud(create(path)?, shape, depth, pixel_pitch)
}
