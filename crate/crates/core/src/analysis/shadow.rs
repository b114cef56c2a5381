use alloc::vec;
use alloc::vec::Vec;

use libm::{cos, hypot, sin, tan};
use serde::{Deserialize, Serialize};

use crate::layer::{Layer, LayerValues};
use crate::spec::TableSpec;

use super::{AnalysisError, SHADOW_LAYER};

const DEG: f64 = core::f64::consts::PI / 180.0;

/// Chords shorter than this (in cell widths) are a ray grazing a cell
/// corner, not passing through the cell.
const MIN_CHORD: f64 = 1e-9;

/// Where the light comes from. Azimuth is geographic: 0 = north, 90 = east.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SunPosition {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl SunPosition {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self, AnalysisError> {
        if (0.0..360.0).contains(&azimuth_deg) && elevation_deg > 0.0 && elevation_deg <= 90.0 {
            Ok(SunPosition {
                azimuth_deg,
                elevation_deg,
            })
        } else {
            Err(AnalysisError::InvalidSun {
                azimuth_deg,
                elevation_deg,
            })
        }
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }
}

/// Cells in shadow for the given height field (meters, row-major).
///
/// A ray leaves each cell center toward the sun. Cell `c` is shaded when some
/// other cell `b` crossed by the ray satisfies
/// `height(b) >= d * tan(elevation) + height(c)`, with `d` the ground
/// distance between the two cell centers. The march steps from one cell
/// boundary to the next, so every crossed cell is tested whatever its chord
/// length; it stops at the grid edge or once no remaining cell can be tall
/// enough.
pub fn shadow_mask(heights: &[f64], spec: &TableSpec, sun: SunPosition) -> Result<Vec<bool>, AnalysisError> {
    let n = spec.cell_count();
    if heights.len() != n {
        return Err(AnalysisError::DimensionMismatch {
            expected: n,
            actual: heights.len(),
        });
    }
    let mut mask = vec![false; n];
    if sun.elevation_deg >= 90.0 {
        return Ok(mask);
    }
    let tan_e = tan(sun.elevation_deg * DEG);
    let bearing = (sun.azimuth_deg - spec.rotation_deg()) * DEG;
    let dir = (sin(bearing), cos(bearing));
    let hmax = heights.iter().copied().fold(0.0f64, f64::max);
    let cs = spec.cell_size_m();
    let (ncols, nrows) = (i64::from(spec.ncols()), i64::from(spec.nrows()));

    for (i, shaded) in mask.iter_mut().enumerate() {
        let h0 = heights[i];
        if hmax <= h0 {
            continue;
        }
        let (col, row) = spec.col_row(i);
        let start = (i64::from(col), i64::from(row));
        *shaded = march(start, dir, (ncols, nrows), |cell, t_enter| {
            // any cell reached past t_enter has its center within half a
            // diagonal of the ray point
            if (t_enter - core::f64::consts::FRAC_1_SQRT_2) * cs * tan_e > hmax - h0 {
                return Step::Stop;
            }
            let (dc, dr) = ((cell.0 - start.0) as f64, (cell.1 - start.1) as f64);
            let d = hypot(dc * cs, dr * cs);
            let b = (cell.1 * ncols + cell.0) as usize;
            if heights[b] >= d * tan_e + h0 {
                Step::Hit
            } else {
                Step::Continue
            }
        });
    }
    Ok(mask)
}

enum Step {
    Continue,
    Hit,
    Stop,
}

/// Visits the cells crossed by a ray from the center of `start` along the
/// unit vector `dir` (x = columns, y = rows), in cell-width units. The
/// starting cell is not visited. Returns whether `visit` reported a hit.
fn march(
    start: (i64, i64),
    dir: (f64, f64),
    (ncols, nrows): (i64, i64),
    mut visit: impl FnMut((i64, i64), f64) -> Step,
) -> bool {
    let axis = |d: f64| -> (i64, f64) {
        if d > 0.0 {
            (1, 1.0 / d)
        } else if d < 0.0 {
            (-1, -1.0 / d)
        } else {
            (0, f64::INFINITY)
        }
    };
    let (sx, inv_x) = axis(dir.0);
    let (sy, inv_y) = axis(dir.1);
    // boundary crossings happen at (k + 0.5) / |d| along the ray
    let (mut kx, mut ky) = (0u32, 0u32);
    let crossing = |k: u32, inv: f64| (f64::from(k) + 0.5) * inv;
    let mut cell = start;
    let mut t_enter = 0.0;
    loop {
        let (tx, ty) = (crossing(kx, inv_x), crossing(ky, inv_y));
        let t_exit = tx.min(ty);
        if cell != start && t_exit - t_enter > MIN_CHORD {
            match visit(cell, t_enter) {
                Step::Continue => {}
                Step::Hit => return true,
                Step::Stop => return false,
            }
        }
        if tx < ty {
            cell.0 += sx;
            kx += 1;
            t_enter = tx;
        } else {
            cell.1 += sy;
            ky += 1;
            t_enter = ty;
        }
        if cell.0 < 0 || cell.1 < 0 || cell.0 >= ncols || cell.1 >= nrows {
            return false;
        }
    }
}

pub fn shadow_layer(
    heights: &[f64],
    spec: &TableSpec,
    sun: SunPosition,
    version: u64,
    producer: &str,
) -> Result<Layer, AnalysisError> {
    let mask = shadow_mask(heights, spec, sun)?;
    Ok(Layer::new(SHADOW_LAYER, LayerValues::Mask(mask), version, producer).expect("masks are always valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::TableSpecDraft;

    fn spec(n: u32) -> TableSpec {
        TableSpecDraft::new("t", n, n).validate().unwrap()
    }

    #[test]
    fn sun_validation() {
        assert!(SunPosition::new(0.0, 90.0).is_ok());
        assert!(SunPosition::new(0.0, 0.0).is_err());
        assert!(SunPosition::new(360.0, 10.0).is_err());
        assert!(SunPosition::new(10.0, f64::NAN).is_err());
    }

    #[test]
    fn vertical_sun_casts_nothing() {
        let s = spec(4);
        let h: Vec<f64> = (0..16).map(|i| (i * 7 % 5) as f64 * 10.0).collect();
        let m = shadow_mask(&h, &s, SunPosition::new(123.0, 90.0).unwrap()).unwrap();
        assert!(m.iter().all(|x| !x));
    }

    #[test]
    fn single_building_west_sun() {
        let s = spec(5);
        let mut h = vec![0.0; 25];
        let b = s.index(2, 2).unwrap();
        h[b] = 10.0;
        let m = shadow_mask(&h, &s, SunPosition::new(270.0, 45.0).unwrap()).unwrap();
        let shaded: Vec<usize> = (0..25).filter(|i| m[*i]).collect();
        assert_eq!(shaded, [s.index(3, 2).unwrap()]);
    }

    #[test]
    fn table_rotation_turns_the_shadow() {
        // rotating the table 90 degrees clockwise makes a west sun come
        // from the table's -y side, so the shadow falls on the next row
        let mut d = TableSpecDraft::new("t", 5, 5);
        d.rotation_deg = 90.0;
        let s = d.validate().unwrap();
        let mut h = vec![0.0; 25];
        h[s.index(2, 2).unwrap()] = 10.0;
        let m = shadow_mask(&h, &s, SunPosition::new(270.0, 45.0).unwrap()).unwrap();
        let shaded: Vec<usize> = (0..25).filter(|i| m[*i]).collect();
        assert_eq!(shaded, [s.index(2, 3).unwrap()]);
    }

    #[test]
    fn never_self_shaded() {
        let s = spec(1);
        let m = shadow_mask(&[100.0], &s, SunPosition::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(m, [false]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(shadow_mask(&[0.0; 3], &spec(2), SunPosition::new(0.0, 10.0).unwrap()).is_err());
    }
}
