//! Golden shadow fixtures shared with other shadow implementations.
//!
//! Each fixture is one canonical JSON file: a table spec, a height field, a
//! sun position and the mask this crate computes for them.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use cityio_core::analysis::{shadow_mask, AnalysisError, SunPosition};
use cityio_core::encoding::to_canonical;
use cityio_core::spec::{TableSpec, TableSpecDraft};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Seed of the committed fixture set.
pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowFixture {
    pub name: String,
    pub spec: TableSpec,
    pub heights: Vec<f64>,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub mask: Vec<bool>,
}

impl ShadowFixture {
    pub fn sun(&self) -> Result<SunPosition, AnalysisError> {
        SunPosition::new(self.azimuth_deg, self.elevation_deg)
    }

    /// Recomputes the mask with the current implementation.
    pub fn recompute(&self) -> Result<Vec<bool>, AnalysisError> {
        shadow_mask(&self.heights, &self.spec, self.sun()?)
    }
}

/// `count` fixtures on 8×8 grids: a rotated table, then random height
/// fields and suns. The last fixture has the sun overhead.
pub fn generate(seed: u64, count: usize) -> Vec<ShadowFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut d = TableSpecDraft::new(&format!("shadow-{i:02}"), 8, 8);
            d.rotation_deg = if i % 3 == 1 { 30.0 } else { 0.0 };
            let spec = d.validate().expect("fixture spec is valid");
            let heights: Vec<f64> = (0..spec.cell_count())
                .map(|_| if rng.random_bool(0.4) { f64::from(rng.random_range(1..=10u32)) * spec.floor_height_m() } else { 0.0 })
                .collect();
            let (azimuth_deg, elevation_deg) = if i + 1 == count {
                (0.0, 90.0)
            } else {
                (f64::from(rng.random_range(0..360u32)), f64::from(rng.random_range(5..=80u32)))
            };
            let sun = SunPosition::new(azimuth_deg, elevation_deg).expect("fixture sun is valid");
            let mask = shadow_mask(&heights, &spec, sun).expect("dimensions match");
            ShadowFixture { name: spec.name().to_string(), spec, heights, azimuth_deg, elevation_deg, mask }
        })
        .collect()
}

/// Writes `<name>.json` files into `dir`, returning their paths.
pub fn write_all(dir: &Path, fixtures: &[ShadowFixture]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    fixtures
        .iter()
        .map(|f| {
            let path = dir.join(format!("{}.json", f.name));
            let mut bytes = to_canonical(f);
            bytes.push(b'\n');
            fs::write(&path, bytes)?;
            Ok(path)
        })
        .collect()
}
