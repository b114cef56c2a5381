use alloc::collections::BTreeMap;
use alloc::string::String;

use libm::log;

use crate::grid::GridState;
use crate::layer::{Layer, LayerValues};
use crate::spec::{Category, TableSpec};

use super::{DENSITY_LAYER, DIVERSITY_LAYER};

/// `far`: building floors per cell of site; `built_cell_fraction`: share of building cells.
pub fn density(state: &GridState, spec: &TableSpec, version: u64, producer: &str) -> Layer {
    let total = state.len() as f64;
    let (mut floors, mut built) = (0u64, 0u64);
    for c in state.cells() {
        if c.category(spec) == Category::Building {
            built += 1;
            floors += u64::from(c.floors_effective(spec));
        }
    }
    let mut m = BTreeMap::new();
    m.insert(String::from("far"), floors as f64 / total);
    m.insert(String::from("built_cell_fraction"), built as f64 / total);
    Layer::new(DENSITY_LAYER, LayerValues::Metrics(m), version, producer).expect("finite metrics")
}

/// `shannon_nats`: entropy of the type distribution over non-empty cells.
pub fn diversity(state: &GridState, spec: &TableSpec, version: u64, producer: &str) -> Layer {
    let mut counts: BTreeMap<u16, u64> = BTreeMap::new();
    for c in state.cells() {
        if c.category(spec) != Category::Empty {
            *counts.entry(c.type_id).or_default() += 1;
        }
    }
    let n: u64 = counts.values().sum();
    let h = if n == 0 {
        0.0
    } else {
        let n = n as f64;
        -counts
            .values()
            .map(|&k| {
                let p = k as f64 / n;
                p * log(p)
            })
            .sum::<f64>()
    };
    let mut m = BTreeMap::new();
    // -0.0 for a single type; keep the encoding stable
    m.insert(String::from("shannon_nats"), h + 0.0);
    Layer::new(DIVERSITY_LAYER, LayerValues::Metrics(m), version, producer).expect("finite metrics")
}
