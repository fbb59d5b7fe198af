//! Ground-truth scenes: per-pixel reflectivity and depth.
//!
//! Scenes persist as a small text format:
//!
//! ```text
//! # spadscan scene v1
//! rows 4
//! cols 3
//! # pixel reflectivity depth_m   (column-stacked, 1-based pixel index)
//! 1 0.5 0.72
//! 2 0.5 0.72
//! ...
//! ```
//!
//! Lines starting with `#` are comments. Exactly `rows * cols` pixel lines
//! must follow the header, in pixel order.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::GridShape;
use crate::params::SystemParams;

const SCENE_MAGIC: &str = "# spadscan scene v1";

#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    shape: GridShape,
    reflectivity: Vec<f64>,
    depth: Vec<f64>,
}

impl SceneModel {
    pub fn new(shape: GridShape, reflectivity: Vec<f64>, depth: Vec<f64>) -> Result<Self> {
        check_len("reflectivity", shape.len(), reflectivity.len())?;
        check_len("depth", shape.len(), depth.len())?;
        if let Some(i) = reflectivity.iter().position(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(Error::invalid(format!(
                "pixel {}: reflectivity must be finite and non-negative",
                i + 1
            )));
        }
        if let Some(i) = depth.iter().position(|z| !(z.is_finite() && *z >= 0.0)) {
            return Err(Error::invalid(format!(
                "pixel {}: depth must be finite and non-negative",
                i + 1
            )));
        }
        Ok(Self {
            shape,
            reflectivity,
            depth,
        })
    }

    /// Constant-depth plane with uniform reflectivity.
    pub fn plane(shape: GridShape, reflectivity: f64, depth: f64) -> Result<Self> {
        Self::new(shape, vec![reflectivity; shape.len()], vec![depth; shape.len()])
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn reflectivity(&self) -> &[f64] {
        &self.reflectivity
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    /// Same geometry with every reflectivity multiplied by `factor`.
    pub fn scaled_reflectivity(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.shape,
            self.reflectivity.iter().map(|k| k * factor).collect(),
            self.depth.clone(),
        )
    }

    /// 0-based time-bin of every pixel; errors name the first pixel whose
    /// time of flight falls outside the observation interval.
    pub fn time_bins(&self, params: &SystemParams) -> Result<Vec<usize>> {
        self.depth
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                let bin = params.depth_to_bin(z);
                if bin < 0 || bin >= params.bins as i64 {
                    Err(Error::DepthOutOfRange {
                        pixel: i + 1,
                        depth_m: z,
                        bin,
                        bins: params.bins,
                    })
                } else {
                    Ok(bin as usize)
                }
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{SCENE_MAGIC}");
        let _ = writeln!(out, "rows {}", self.shape.rows());
        let _ = writeln!(out, "cols {}", self.shape.cols());
        let _ = writeln!(out, "# pixel reflectivity depth_m");
        for (i, (k, z)) in self.reflectivity.iter().zip(&self.depth).enumerate() {
            let _ = writeln!(out, "{} {:?} {:?}", i + 1, k, z);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "scene file",
            detail,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<usize> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| bad(format!("missing `{key}` header")))?;
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next().map(str::parse::<usize>), parts.next()) {
                (Some(k), Some(Ok(v)), None) if k == key => Ok(v),
                _ => Err(bad(format!("line {no}: expected `{key} <count>`"))),
            }
        };
        let rows = header("rows")?;
        let cols = header("cols")?;
        let shape = GridShape::new(rows, cols)?;
        let mut reflectivity = Vec::with_capacity(shape.len());
        let mut depth = Vec::with_capacity(shape.len());
        for (no, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(bad(format!("line {no}: expected `pixel reflectivity depth`")));
            }
            let pixel: usize = fields[0]
                .parse()
                .map_err(|_| bad(format!("line {no}: bad pixel index")))?;
            if pixel != reflectivity.len() + 1 {
                return Err(bad(format!(
                    "line {no}: pixel {pixel} out of order (expected {})",
                    reflectivity.len() + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("line {no}: bad number `{s}`")))
            };
            reflectivity.push(parse(fields[1])?);
            depth.push(parse(fields[2])?);
        }
        Self::new(shape, reflectivity, depth)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Ball in front of a flat screen, seen under orthographic projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallGeometry {
    /// Vertical extent of the imaged field (m); pixels are square.
    pub field_height: f64,
    pub ball_radius: f64,
    /// Distance from the detector to the ball centre (m).
    pub ball_center_depth: f64,
    /// Lateral offset of the ball centre from the optical axis, (down, right) in m.
    pub ball_offset: (f64, f64),
    pub screen_depth: f64,
    pub ball_reflectivity: f64,
    pub screen_reflectivity: f64,
}

impl Default for BallGeometry {
    /// 11 cm ball centred 50 cm away, screen at 72 cm.
    fn default() -> Self {
        Self {
            field_height: 0.40,
            ball_radius: 0.11,
            ball_center_depth: 0.50,
            ball_offset: (0.0, 0.0),
            screen_depth: 0.72,
            ball_reflectivity: 0.9,
            screen_reflectivity: 0.5,
        }
    }
}

/// Sphere-plus-plane z-buffer. The optical axis passes through the centre
/// of pixel `(rows/2, cols/2)` (integer division, 0-based).
pub fn make_ball_scene(
    shape: GridShape,
    geometry: &BallGeometry,
    params: &SystemParams,
) -> Result<SceneModel> {
    let g = geometry;
    let positive = [g.field_height, g.screen_depth];
    if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(g.ball_radius >= 0.0) {
        return Err(Error::invalid("ball geometry needs positive extents"));
    }
    if g.ball_center_depth - g.ball_radius < 0.0 {
        return Err(Error::invalid("ball extends behind the detector"));
    }
    if g.ball_radius > 0.0 && g.ball_center_depth + g.ball_radius > g.screen_depth {
        return Err(Error::invalid("ball must sit entirely in front of the screen"));
    }
    let max_depth = params.bin_to_depth(params.bins - 1);
    if params.depth_to_bin(g.screen_depth) >= params.bins as i64 {
        return Err(Error::invalid(format!(
            "screen at {} m lies beyond the observation window ({max_depth:.4} m)",
            g.screen_depth
        )));
    }

    let pitch = g.field_height / shape.rows() as f64;
    let (axis_r, axis_c) = (shape.rows() / 2, shape.cols() / 2);
    let r2 = g.ball_radius * g.ball_radius;
    let mut reflectivity = Vec::with_capacity(shape.len());
    let mut depth = Vec::with_capacity(shape.len());
    for k in 0..shape.len() {
        let (r, c) = shape.coords(k);
        let y = (r as f64 - axis_r as f64) * pitch - g.ball_offset.0;
        let x = (c as f64 - axis_c as f64) * pitch - g.ball_offset.1;
        let rho2 = x * x + y * y;
        if g.ball_radius > 0.0 && rho2 <= r2 {
            depth.push(g.ball_center_depth - (r2 - rho2).sqrt());
            reflectivity.push(g.ball_reflectivity);
        } else {
            depth.push(g.screen_depth);
            reflectivity.push(g.screen_reflectivity);
        }
    }
    SceneModel::new(shape, reflectivity, depth)
}
