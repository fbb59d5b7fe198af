//! Single-pixel depth and intensity imaging with a DMD-masked SPAD:
//! forward model, Poisson variance stabilisation, TV-regularised ADMM and
//! the intensity and depth reconstruction pipelines.

pub mod admm;
pub mod calibrate;
pub mod circulant;
pub mod depth;
pub mod error;
pub mod export;
pub mod forward;
pub mod grid;
pub mod intensity;
pub mod metrics;
pub mod params;
pub mod profile;
pub mod scenario;
pub mod scene;
pub mod sweep;
pub mod vst;

pub use error::{Error, Result};
pub use grid::GridShape;
pub use params::{IlluminationConfig, SystemParams, SPEED_OF_LIGHT};
pub use scene::{make_ball_scene, BallGeometry, SceneModel};
