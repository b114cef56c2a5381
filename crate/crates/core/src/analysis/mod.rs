//! Analyses a compute worker publishes as layers.
//!
//! These are representative urban indicators chosen to be deterministic and
//! checkable by hand or by brute force: building heights, a sun shadow mask,
//! floor-area density, land-use diversity and grid travel times.

mod heights;
mod metrics;
mod routing;
mod shadow;

pub use heights::{building_heights, height_field};
pub use metrics::{density, diversity};
pub use routing::{accessibility, accessibility_layer_name, trip_duration, TravelSpeeds, UNREACHABLE};
pub use shadow::{shadow_layer, shadow_mask, SunPosition};

use thiserror::Error;

pub const HEIGHTS_LAYER: &str = "heights";
pub const SHADOW_LAYER: &str = "shadow";
pub const DENSITY_LAYER: &str = "density";
pub const DIVERSITY_LAYER: &str = "diversity";

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum AnalysisError {
    #[error("sun azimuth must be in [0, 360) and elevation in (0, 90], got ({azimuth_deg}, {elevation_deg})")]
    InvalidSun { azimuth_deg: f64, elevation_deg: f64 },
    #[error("speeds must satisfy 0 < walk <= road, got walk {walk_mps} road {road_mps}")]
    InvalidSpeeds { road_mps: f64, walk_mps: f64 },
    #[error("cell ({col}, {row}) is outside the grid")]
    IndexOutOfRange { col: u32, row: u32 },
    #[error("input has {actual} cells, table has {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
}
