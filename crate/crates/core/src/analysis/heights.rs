use alloc::vec::Vec;

use crate::grid::GridState;
use crate::layer::{Layer, LayerValues};
use crate::spec::TableSpec;

use super::HEIGHTS_LAYER;

/// Meters per cell: effective floors times the table's floor height.
pub fn height_field(state: &GridState, spec: &TableSpec) -> Vec<f64> {
    state
        .cells()
        .iter()
        .map(|c| f64::from(c.floors_effective(spec)) * spec.floor_height_m())
        .collect()
}

pub fn building_heights(state: &GridState, spec: &TableSpec, version: u64, producer: &str) -> Layer {
    Layer::new(HEIGHTS_LAYER, LayerValues::Scalar(height_field(state, spec)), version, producer)
        .expect("heights are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{new_grid, Cell, CellEdit};
    use crate::spec::TableSpecDraft;

    #[test]
    fn heights_from_floors() {
        let s = TableSpecDraft::new("t", 3, 1).validate().unwrap();
        assert!(height_field(&new_grid(&s), &s).iter().all(|h| *h == 0.0));
        let g = new_grid(&s)
            .apply_edits(
                &s,
                &[
                    CellEdit::new(0, Cell::of_type(1)),
                    CellEdit::new(1, Cell::of_type(1).with_floors(10)),
                    CellEdit::new(2, Cell::of_type(4)),
                ],
            )
            .unwrap();
        assert_eq!(height_field(&g, &s), [12.0, 30.0, 0.0]);
    }
}
