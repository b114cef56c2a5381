//! Brute-force reference implementations shared by the core integration
//! tests and the acceptance suite. Written against the documented rules,
//! not against the library's code paths.
#![allow(dead_code)]

use cityio_core::analysis::SunPosition;
use cityio_core::grid::{Cell, GridState, Rotation};
use cityio_core::spec::{Category, TableSpec, TableSpecDraft};
use rand::Rng;

/// Shadow mask by sampling the ray every `cell_size / div` meters and
/// attributing each sample to the cell containing it. Marches to the grid
/// edge with no early exit.
pub fn shadow_by_sampling(heights: &[f64], spec: &TableSpec, sun: SunPosition, div: u32) -> Vec<bool> {
    let n = spec.cell_count();
    let mut out = vec![false; n];
    if sun.elevation_deg() >= 90.0 {
        return out;
    }
    let cs = spec.cell_size_m();
    let step = cs / f64::from(div);
    let tan_e = sun.elevation_deg().to_radians().tan();
    let bearing = (sun.azimuth_deg() - spec.rotation_deg()).to_radians();
    let (dx, dy) = (bearing.sin(), bearing.cos());
    let (w, h) = (spec.ncols() as i64, spec.nrows() as i64);
    for i in 0..n {
        let (c, r) = ((i as i64) % w, (i as i64) / w);
        let (x0, y0) = ((c as f64 + 0.5) * cs, (r as f64 + 0.5) * cs);
        let mut k = 1u64;
        loop {
            let d = k as f64 * step;
            let (x, y) = (x0 + d * dx, y0 + d * dy);
            let (bc, br) = ((x / cs).floor() as i64, (y / cs).floor() as i64);
            if bc < 0 || br < 0 || bc >= w || br >= h {
                break;
            }
            if (bc, br) != (c, r) {
                let center_d = (((bc - c) as f64) * cs).hypot(((br - r) as f64) * cs);
                if heights[(br * w + bc) as usize] >= center_d * tan_e + heights[i] {
                    out[i] = true;
                    break;
                }
            }
            k += 1;
        }
    }
    out
}

/// Heights drawn the way a table produces them: about half the cells are
/// buildings of 1..=10 floors.
pub fn random_building_heights(rng: &mut impl Rng, spec: &TableSpec) -> Vec<f64> {
    (0..spec.cell_count())
        .map(|_| {
            if rng.random_bool(0.5) {
                f64::from(rng.random_range(1..=10u32)) * spec.floor_height_m()
            } else {
                0.0
            }
        })
        .collect()
}

pub fn random_sun(rng: &mut impl Rng) -> SunPosition {
    let az = rng.random_range(0.0..360.0);
    let el = rng.random_range(1.0..=89.0);
    SunPosition::new(az, el).unwrap()
}

pub fn entry_cost_ns(spec: &TableSpec, cell: &Cell, road_mps: f64, walk_mps: f64) -> Option<u64> {
    let cs = spec.cell_size_m();
    match spec.registry()[cell.type_id as usize].category {
        Category::Water => None,
        Category::Road => Some((cs / road_mps * 1e9).round() as u64),
        _ => Some((cs / walk_mps * 1e9).round() as u64),
    }
}

/// FIFO label-correcting shortest paths from `from` (Bellman-Ford style):
/// keep relaxing until no label improves. Seconds, `None` if unreachable.
pub fn travel_times_from(state: &GridState, spec: &TableSpec, from: usize, road: f64, walk: f64) -> Vec<Option<f64>> {
    let n = spec.cell_count();
    let w = spec.ncols() as usize;
    let h = spec.nrows() as usize;
    let cost: Vec<Option<u64>> = state.cells().iter().map(|c| entry_cost_ns(spec, c, road, walk)).collect();
    let mut label: Vec<Option<u64>> = vec![None; n];
    label[from] = Some(0);
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        let (c, r) = (u % w, u / w);
        let mut nbrs = Vec::new();
        if c > 0 {
            nbrs.push(u - 1);
        }
        if c + 1 < w {
            nbrs.push(u + 1);
        }
        if r > 0 {
            nbrs.push(u - w);
        }
        if r + 1 < h {
            nbrs.push(u + w);
        }
        for v in nbrs {
            let Some(step) = cost[v] else { continue };
            let cand = label[u].unwrap() + step;
            if label[v].is_none_or(|old| cand < old) {
                label[v] = Some(cand);
                queue.push_back(v);
            }
        }
    }
    label.into_iter().map(|l| l.map(|ns| ns as f64 / 1e9)).collect()
}

pub fn spec_8x8(name: &str) -> TableSpec {
    TableSpecDraft::new(name, 8, 8).validate().unwrap()
}

/// Random grid over the default palette with roughly `water` share of water.
pub fn random_grid(rng: &mut impl Rng, spec: &TableSpec, water: f64) -> GridState {
    let cells = (0..spec.cell_count())
        .map(|_| {
            let type_id = if rng.random_bool(water) { 5 } else { rng.random_range(0..5u16) };
            let floors = (type_id == 1 && rng.random_bool(0.3)).then(|| rng.random_range(1..12));
            let rotation = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270][rng.random_range(0..4)];
            Cell { type_id, rotation, floors }
        })
        .collect();
    GridState::from_cells(spec, cells).unwrap()
}

/// Shannon entropy (nats) by tallying type ids of non-empty cells.
pub fn entropy_by_tally(state: &GridState, spec: &TableSpec) -> f64 {
    let mut tally = std::collections::HashMap::<u16, f64>::new();
    let mut total = 0.0;
    for c in state.cells() {
        if spec.registry()[c.type_id as usize].category != Category::Empty {
            *tally.entry(c.type_id).or_default() += 1.0;
            total += 1.0;
        }
    }
    if total == 0.0 {
        return 0.0;
    }
    tally.values().map(|k| -(k / total) * (k / total).ln()).sum()
}

/// Shadow mask by clipping the ray against every other cell's square: `b`
/// is crossed when the ray from `c`'s center spends a positive length
/// (beyond grazing) inside it. The exact limit of [`shadow_by_sampling`]
/// as the step goes to zero.
pub fn shadow_by_clipping(heights: &[f64], spec: &TableSpec, sun: SunPosition) -> Vec<bool> {
    let n = spec.cell_count();
    let mut out = vec![false; n];
    if sun.elevation_deg() >= 90.0 {
        return out;
    }
    let cs = spec.cell_size_m();
    let tan_e = sun.elevation_deg().to_radians().tan();
    let bearing = (sun.azimuth_deg() - spec.rotation_deg()).to_radians();
    let (dx, dy) = (bearing.sin(), bearing.cos());
    let w = spec.ncols() as usize;
    for c in 0..n {
        let (cx, cy) = ((c % w) as f64 + 0.5, (c / w) as f64 + 0.5);
        out[c] = (0..n).filter(|&b| b != c).any(|b| {
            let (bx, by) = ((b % w) as f64, (b / w) as f64);
            let (lo_x, hi_x) = slab(cx, dx, bx);
            let (lo_y, hi_y) = slab(cy, dy, by);
            let (t0, t1) = (lo_x.max(lo_y).max(0.0), hi_x.min(hi_y));
            if t1 - t0 <= 1e-9 {
                return false;
            }
            let d = ((bx - cx + 0.5) * cs).hypot((by - cy + 0.5) * cs);
            heights[b] >= d * tan_e + heights[c]
        });
    }
    out
}

/// Parameter interval where `p + t * d` lies in `[lo, lo + 1]`.
fn slab(p: f64, d: f64, lo: f64) -> (f64, f64) {
    if d == 0.0 {
        return if (lo..=lo + 1.0).contains(&p) { (f64::NEG_INFINITY, f64::INFINITY) } else { (1.0, 0.0) };
    }
    let (a, b) = ((lo - p) / d, (lo + 1.0 - p) / d);
    (a.min(b), a.max(b))
}
