//! Per-pixel TCSPC histograms (`R`, `n x m`) and their on-disk layouts.
//!
//! Binary layout (all integers little-endian):
//!
//! | offset | size      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | 8         | magic `b"SPADHIST"`                     |
//! | 8      | 4         | format version, `u32` = 1               |
//! | 12     | 4         | rows, `u32`                             |
//! | 16     | 4         | cols, `u32`                             |
//! | 20     | 4         | bins `m`, `u32`                         |
//! | 24     | 4·n·m     | counts, `u32`, pixel-major (row `i` = pixel `i` in column-stacked order) |
//!
//! CSV export has one line per pixel: `pixel,row,col,bin_0,...,bin_{m-1}`
//! with 1-based pixel/row/col.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{check_len, Error, Result};
use crate::grid::GridShape;

pub const CUBE_MAGIC: &[u8; 8] = b"SPADHIST";
pub const CUBE_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramCube {
    shape: GridShape,
    counts: Array2<u32>,
}

impl HistogramCube {
    pub fn new(shape: GridShape, counts: Array2<u32>) -> Result<Self> {
        check_len("histogram rows", shape.len(), counts.nrows())?;
        if counts.ncols() == 0 {
            return Err(Error::invalid("histograms need at least one bin"));
        }
        Ok(Self { shape, counts })
    }

    pub fn zeros(shape: GridShape, bins: usize) -> Result<Self> {
        Self::new(shape, Array2::zeros((shape.len(), bins)))
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn bins(&self) -> usize {
        self.counts.ncols()
    }

    pub fn counts(&self) -> &Array2<u32> {
        &self.counts
    }

    pub fn counts_mut(&mut self) -> &mut Array2<u32> {
        &mut self.counts
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.counts.mapv(f64::from)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CUBE_MAGIC)?;
        for v in [
            CUBE_VERSION,
            self.shape.rows() as u32,
            self.shape.cols() as u32,
            self.bins() as u32,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(4 * self.bins());
        for row in self.counts.outer_iter() {
            buf.clear();
            for &c in row {
                buf.extend_from_slice(&c.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |detail: &str| Error::Format {
            what: "histogram cube",
            detail: detail.to_string(),
        };
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| bad("truncated header"))?;
        if &header[..8] != CUBE_MAGIC {
            return Err(bad("bad magic"));
        }
        let field = |k: usize| u32::from_le_bytes(header[8 + 4 * k..12 + 4 * k].try_into().unwrap());
        if field(0) != CUBE_VERSION {
            return Err(bad(&format!("unsupported version {}", field(0))));
        }
        let shape = GridShape::new(field(1) as usize, field(2) as usize)?;
        let bins = field(3) as usize;
        if bins == 0 {
            return Err(bad("zero bins"));
        }
        let total = shape
            .len()
            .checked_mul(bins)
            .ok_or_else(|| bad("dimensions overflow"))?;
        let mut raw = vec![0u8; 4 * total];
        r.read_exact(&mut raw).map_err(|_| bad("truncated counts"))?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(|_| bad("read error"))? != 0 {
            return Err(bad("trailing bytes"));
        }
        let counts: Vec<u32> = raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let counts = Array2::from_shape_vec((shape.len(), bins), counts)
            .map_err(|e| bad(&e.to_string()))?;
        Self::new(shape, counts)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_binary(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_matrix_csv(self.shape, &self.counts, w)
    }
}

/// Noiseless expected counts `Λ` (`n x m`, real-valued).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedHistograms {
    shape: GridShape,
    values: Array2<f64>,
}

impl ExpectedHistograms {
    pub fn new(shape: GridShape, values: Array2<f64>) -> Result<Self> {
        check_len("histogram rows", shape.len(), values.nrows())?;
        if values.ncols() == 0 {
            return Err(Error::invalid("histograms need at least one bin"));
        }
        Ok(Self { shape, values })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn bins(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Per-pixel expected totals.
    pub fn totals(&self) -> Vec<f64> {
        self.values.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Rounds every expectation to the nearest count; a noiseless cube.
    pub fn rounded(&self) -> Result<HistogramCube> {
        if self.values.iter().any(|&v| !(v >= 0.0 && v < u32::MAX as f64)) {
            return Err(Error::invalid("expected counts must lie in [0, u32::MAX)"));
        }
        HistogramCube::new(self.shape, self.values.mapv(|v| v.round() as u32))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_matrix_csv(self.shape, &self.values, w)
    }
}

fn write_matrix_csv<T: ToString, W: Write>(
    shape: GridShape,
    values: &Array2<T>,
    w: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["pixel".to_string(), "row".into(), "col".into()];
    header.extend((0..values.ncols()).map(|j| format!("bin_{j}")));
    out.write_record(&header)?;
    for (k, row) in values.outer_iter().enumerate() {
        let (r, c) = shape.coords(k);
        let mut record = vec![(k + 1).to_string(), (r + 1).to_string(), (c + 1).to_string()];
        record.extend(row.iter().map(ToString::to_string));
        out.write_record(&record)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `v_i = Σ_j R[i][j]`: total counts per measurement.
pub fn intensity_observation(cube: &HistogramCube) -> Vec<u64> {
    cube.counts
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&c| u64::from(c)).sum())
        .collect()
}
