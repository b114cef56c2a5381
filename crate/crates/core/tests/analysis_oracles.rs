mod oracles;

use cityio_core::analysis::{
    accessibility, density, diversity, height_field, shadow_mask, trip_duration, SunPosition, TravelSpeeds, UNREACHABLE,
};
use cityio_core::grid::{new_grid, Cell, CellEdit, GridState};
use cityio_core::spec::{Category, TableSpecDraft};
use oracles::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn shadow_matches_exact_clipping() {
    let spec = spec_8x8("shade");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5AD0);
    for case in 0..300 {
        let heights = random_building_heights(&mut rng, &spec);
        let sun = random_sun(&mut rng);
        let got = shadow_mask(&heights, &spec, sun).unwrap();
        assert_eq!(got, shadow_by_clipping(&heights, &spec, sun), "case {case}, {sun:?}");
    }
}

#[test]
fn sampling_never_finds_extra_shade() {
    // samples always land in crossed cells, so sampling can only miss
    // cells the ray clips by less than one step
    let spec = spec_8x8("shade");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5AD1);
    for _ in 0..100 {
        let heights = random_building_heights(&mut rng, &spec);
        let sun = random_sun(&mut rng);
        let got = shadow_mask(&heights, &spec, sun).unwrap();
        let sampled = shadow_by_sampling(&heights, &spec, sun, 64);
        assert!((0..64).all(|i| !sampled[i] || got[i]), "{sun:?}");
    }
}

#[test]
fn single_building_west_sun_oracles_agree() {
    let spec = TableSpecDraft::new("one", 5, 5).validate().unwrap();
    let mut h = vec![0.0; 25];
    h[spec.index(2, 2).unwrap()] = 10.0;
    let sun = SunPosition::new(270.0, 45.0).unwrap();
    let want: Vec<bool> = (0..25).map(|i| i == spec.index(3, 2).unwrap()).collect();
    assert_eq!(shadow_by_sampling(&h, &spec, sun, 64), want);
    assert_eq!(shadow_by_clipping(&h, &spec, sun), want);
    assert_eq!(shadow_mask(&h, &spec, sun).unwrap(), want);
}

#[test]
fn vertical_sun_never_shades() {
    let spec = spec_8x8("shade");
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    for _ in 0..20 {
        let heights = random_building_heights(&mut rng, &spec);
        let sun = SunPosition::new(rng.random_range(0.0..360.0), 90.0).unwrap();
        assert!(shadow_mask(&heights, &spec, sun).unwrap().iter().all(|s| !s));
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn routing_matches_label_correcting() {
    let spec = spec_8x8("route");
    let speeds = TravelSpeeds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x2047);
    for _ in 0..100 {
        let grid = random_grid(&mut rng, &spec, 0.25);
        let all: Vec<Vec<Option<f64>>> = (0..64)
            .map(|i| travel_times_from(&grid, &spec, i, speeds.road_mps, speeds.walk_mps))
            .collect();
        for a in 0..64 {
            for b in 0..64 {
                let (ca, cb) = (spec.col_row(a), spec.col_row(b));
                let got = trip_duration(&grid, &spec, ca, cb, speeds).unwrap();
                assert_eq!(got, all[a][b], "{ca:?} -> {cb:?}");
            }
            assert_eq!(trip_duration(&grid, &spec, spec.col_row(a), spec.col_row(a), speeds), Ok(Some(0.0)));
        }
        for target in [Category::Building, Category::Road, Category::Park] {
            let layer = accessibility(&grid, &spec, target, speeds, 1, "t").unwrap();
            let targets: Vec<usize> =
                (0..64).filter(|&i| grid.cells()[i].category(&spec) == target).collect();
            for (i, v) in layer.scalars().unwrap().iter().enumerate() {
                let best = targets.iter().filter_map(|&t| all[i][t]).fold(None, |m: Option<f64>, x| {
                    Some(m.map_or(x, |m| m.min(x)))
                });
                assert_eq!(*v, best.unwrap_or(UNREACHABLE), "cell {i} to {target:?}");
            }
        }
    }
}

#[test]
fn enclosed_cell_is_unreachable() {
    let spec = spec_8x8("route");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let (c, r) = (rng.random_range(1..7u32), rng.random_range(1..7u32));
        let mut edits = vec![CellEdit::new(spec.index(c, r).unwrap() as u32, Cell::of_type(4))];
        for (dc, dr) in [(-1i32, 0i32), (1, 0), (0, -1), (0, 1)] {
            let i = spec.index((c as i32 + dc) as u32, (r as i32 + dr) as u32).unwrap();
            edits.push(CellEdit::new(i as u32, Cell::of_type(5)));
        }
        let grid = new_grid(&spec).apply_edits(&spec, &edits).unwrap();
        assert_eq!(trip_duration(&grid, &spec, (0, 0), (c, r), TravelSpeeds::default()), Ok(None));
        let layer = accessibility(&grid, &spec, Category::Park, TravelSpeeds::default(), 1, "t").unwrap();
        assert_eq!(layer.scalars().unwrap()[0], UNREACHABLE);
    }
}

#[test]
fn uniform_four_types_entropy() {
    let spec = TableSpecDraft::new("mix", 4, 4).validate().unwrap();
    let cells = (0..16).map(|i| Cell::of_type(1 + (i % 4) as u16)).collect();
    let grid = GridState::from_cells(&spec, cells).unwrap();
    let h = diversity(&grid, &spec, 1, "t").metric("shannon_nats").unwrap();
    assert!((h - 4f64.ln()).abs() <= 1e-12, "{h}");
}

#[test]
fn eight_two_floor_buildings_give_unit_far() {
    let spec = TableSpecDraft::new("far", 4, 4).validate().unwrap();
    let edits: Vec<_> = (0..8).map(|i| CellEdit::new(i, Cell::of_type(1).with_floors(2))).collect();
    let grid = new_grid(&spec).apply_edits(&spec, &edits).unwrap();
    let d = density(&grid, &spec, 1, "t");
    assert_eq!(d.metric("far"), Some(1.0));
    assert_eq!(d.metric("built_cell_fraction"), Some(0.5));
}

#[test]
fn entropy_matches_tally() {
    let spec = spec_8x8("mix");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let water = rng.random_range(0.0..0.5);
        let grid = random_grid(&mut rng, &spec, water);
        let got = diversity(&grid, &spec, 1, "t").metric("shannon_nats").unwrap();
        let want = entropy_by_tally(&grid, &spec);
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
}

fn heights_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), (1u32..=10).prop_map(|f| f64::from(f) * 3.0)], 64)
}

fn uniform_speed_grid(road: Vec<bool>) -> GridState {
    let spec = spec_8x8("metric");
    let edits: Vec<_> = road
        .iter()
        .enumerate()
        .filter(|(_, r)| **r)
        .map(|(i, _)| CellEdit::new(i as u32, Cell::of_type(3)))
        .collect();
    new_grid(&spec).apply_edits(&spec, &edits).unwrap()
}

proptest! {
    #[test]
    fn raising_the_sun_never_adds_shade(
        heights in heights_strategy(),
        az in 0.0..360.0f64,
        e1 in 1.0..89.0f64,
        de in 0.0..30.0f64,
    ) {
        let spec = spec_8x8("mono");
        let e2 = (e1 + de).min(90.0);
        let low = shadow_mask(&heights, &spec, SunPosition::new(az, e1).unwrap()).unwrap();
        let high = shadow_mask(&heights, &spec, SunPosition::new(az, e2).unwrap()).unwrap();
        for i in 0..64 {
            prop_assert!(!high[i] || low[i], "cell {} shaded at {} but not at {}", i, e2, e1);
        }
    }

    #[test]
    fn entropy_bounds(types in prop::collection::vec(0u16..6, 64)) {
        let spec = spec_8x8("mix");
        let grid = GridState::from_cells(&spec, types.iter().map(|t| Cell::of_type(*t)).collect()).unwrap();
        let h = diversity(&grid, &spec, 1, "t").metric("shannon_nats").unwrap();
        let distinct = types.iter().filter(|t| **t != 0).collect::<std::collections::BTreeSet<_>>().len();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (distinct.max(1) as f64).ln() + 1e-12);
    }

    #[test]
    fn uniform_speed_trips_are_symmetric(a in 0usize..64, b in 0usize..64, walk in 0.5..3.0f64) {
        let spec = spec_8x8("metric");
        let grid = new_grid(&spec);
        let sp = TravelSpeeds { road_mps: 10.0, walk_mps: walk };
        let ab = trip_duration(&grid, &spec, spec.col_row(a), spec.col_row(b), sp).unwrap();
        let ba = trip_duration(&grid, &spec, spec.col_row(b), spec.col_row(a), sp).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn triangle_inequality(road in prop::collection::vec(any::<bool>(), 64), a in 0usize..64, b in 0usize..64, c in 0usize..64) {
        let spec = spec_8x8("metric");
        let grid = uniform_speed_grid(road);
        let sp = TravelSpeeds::default();
        let t = |x: usize, y: usize| trip_duration(&grid, &spec, spec.col_row(x), spec.col_row(y), sp).unwrap().unwrap();
        prop_assert!(t(a, c) <= t(a, b) + t(b, c) + 1e-9);
    }

    #[test]
    fn heights_follow_floors(types in prop::collection::vec((0u16..6, prop::option::of(1u32..20)), 64)) {
        let spec = spec_8x8("h");
        let cells: Vec<Cell> = types
            .iter()
            .map(|&(t, f)| match (t, f) {
                (1 | 2, Some(f)) => Cell::of_type(t).with_floors(f),
                _ => Cell::of_type(t),
            })
            .collect();
        let grid = GridState::from_cells(&spec, cells.clone()).unwrap();
        let h = height_field(&grid, &spec);
        for (c, v) in cells.iter().zip(h) {
            let floors = match c.type_id {
                1 => c.floors.unwrap_or(4),
                2 => c.floors.unwrap_or(8),
                _ => 0,
            };
            prop_assert_eq!(v, f64::from(floors) * 3.0);
        }
    }
}
