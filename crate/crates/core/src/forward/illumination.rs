use crate::circulant::Circulant;
use crate::error::Result;
use crate::grid::GridShape;
use crate::params::IlluminationConfig;

/// What the DMD projects for each measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pattern {
    /// `w x w` window stepped one pixel per measurement.
    Window(IlluminationConfig),
    /// Every mirror off; only leaked light reaches the scene.
    AllOff { epsilon: f64 },
}

/// The `n x n` circulant blur `H` of overlapping window scanning.
///
/// Row `k` of `H` holds the DMD reflection coefficients seen by measurement
/// `k`: `H[k][j] = h[(j - k) mod n]`, with the kernel `h` equal to 1 on the
/// `w x w` window anchored at the top-left of the column-stacked image and
/// `ε` everywhere else. Windows that run past the bottom or right edge wrap
/// around periodically through the column-stacked index.
#[derive(Debug, Clone)]
pub struct IlluminationOperator {
    shape: GridShape,
    pattern: Pattern,
    circulant: Circulant,
}

impl IlluminationOperator {
    /// Builds `h` from the piecewise rule: `h_i = 1` when
    /// `0 < i MOD Θ ≤ w` and `(i - i MOD Θ)/Θ + 1 ≤ w`, else `ε`, where
    /// `a MOD b` is the smallest positive residue and `Θ` the row count.
    pub fn new(shape: GridShape, config: IlluminationConfig) -> Result<Self> {
        config.validate(shape)?;
        let theta = shape.rows();
        let w = config.window;
        let kernel = (1..=shape.len())
            .map(|i| {
                let residue = (i - 1) % theta + 1;
                let column = (i - residue) / theta + 1;
                if residue > 0 && residue <= w && column <= w {
                    1.0
                } else {
                    config.epsilon
                }
            })
            .collect();
        Ok(Self {
            shape,
            pattern: Pattern::Window(config),
            circulant: Circulant::from_first_row(kernel),
        })
    }

    /// All-off pattern used to measure leaked (diffraction) light alone.
    pub fn all_off(shape: GridShape, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(crate::Error::invalid(format!(
                "leakage fraction {epsilon} outside [0, 1)"
            )));
        }
        Ok(Self {
            shape,
            pattern: Pattern::AllOff { epsilon },
            circulant: Circulant::from_first_row(vec![epsilon; shape.len()]),
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn pattern(&self) -> Pattern {
        self.pattern
    }

    /// First row `h` of `H`.
    pub fn kernel(&self) -> &[f64] {
        self.circulant.first_row()
    }

    pub fn circulant(&self) -> &Circulant {
        &self.circulant
    }

    /// `H x` by FFT.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.circulant.apply(x)
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.circulant.apply_transpose(x)
    }

    /// Dense `H`, row-major; for small reference computations.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.circulant.to_dense()
    }
}
