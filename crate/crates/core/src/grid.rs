//! Image grid and the column-stacked pixel ordering.
//!
//! Images are stored as vectors of length `n = rows * cols` with columns
//! stacked one after another: linear pixel `i` (1-based) sits at row
//! `((i-1) mod rows) + 1`, column `floor((i-1) / rows) + 1`. Storage inside
//! the crate is 0-based (`k = i - 1`); the public index helpers take and
//! return 1-based values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    rows: usize,
    cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "grid must be at least 1x1, got {rows}x{cols}"
            )));
        }
        rows.checked_mul(cols)
            .ok_or_else(|| Error::invalid("grid size overflows usize"))?;
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// 0-based storage offset of a 0-based (row, col).
    #[inline]
    pub fn offset(&self, row: usize, col: usize) -> usize {
        row + col * self.rows
    }

    /// 0-based (row, col) of a 0-based storage offset.
    #[inline]
    pub fn coords(&self, offset: usize) -> (usize, usize) {
        (offset % self.rows, offset / self.rows)
    }

    /// Maps a 1-based linear pixel index to its 1-based (row, col).
    pub fn pixel_to_rowcol(&self, i: usize) -> Result<(usize, usize)> {
        if i == 0 || i > self.len() {
            return Err(Error::PixelOutOfRange {
                index: i,
                n: self.len(),
            });
        }
        Ok(((i - 1) % self.rows + 1, (i - 1) / self.rows + 1))
    }

    /// Maps a 1-based (row, col) to its 1-based linear pixel index.
    pub fn rowcol_to_pixel(&self, row: usize, col: usize) -> Result<usize> {
        if row == 0 || row > self.rows || col == 0 || col > self.cols {
            return Err(Error::invalid(format!(
                "({row}, {col}) outside a {}x{} grid",
                self.rows, self.cols
            )));
        }
        Ok((col - 1) * self.rows + row)
    }

    /// Transposes a column-stacked image into row-major order (for image
    /// files, which are written scanline by scanline).
    pub fn to_row_major<T: Copy>(&self, image: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(image[self.offset(r, c)]);
            }
        }
        out
    }
}

impl std::fmt::Display for GridShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}
