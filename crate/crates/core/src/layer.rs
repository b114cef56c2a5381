//! Derived data layers tied to the version they were computed from.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::TableSpec;

pub const MAX_LAYER_NAME_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    ScalarGrid,
    MaskGrid,
    Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerValues {
    Scalar(Vec<f64>),
    Mask(Vec<bool>),
    Metrics(BTreeMap<String, f64>),
}

impl LayerValues {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerValues::Scalar(_) => LayerKind::ScalarGrid,
            LayerValues::Mask(_) => LayerKind::MaskGrid,
            LayerValues::Metrics(_) => LayerKind::Metrics,
        }
    }

    fn grid_len(&self) -> Option<usize> {
        match self {
            LayerValues::Scalar(v) => Some(v.len()),
            LayerValues::Mask(v) => Some(v.len()),
            LayerValues::Metrics(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LayerError {
    #[error("layer name {0:?} must match [a-z0-9_]{{1,64}}")]
    InvalidName(String),
    #[error("layer kind {declared:?} does not match its values")]
    KindMismatch { declared: LayerKind },
    #[error("layer has {actual} cells, table has {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("layer values must be finite")]
    NonFinite,
}

/// Analysis or aggregation output for one table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerRecord", into = "LayerRecord")]
pub struct Layer {
    name: String,
    values: LayerValues,
    produced_from_version: u64,
    producer: String,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    name: String,
    kind: LayerKind,
    values: LayerValues,
    produced_from_version: u64,
    producer: String,
}

impl TryFrom<LayerRecord> for Layer {
    type Error = LayerError;

    fn try_from(r: LayerRecord) -> Result<Self, LayerError> {
        // `[]` deserializes as a scalar grid whatever the declared kind.
        let values = match (r.kind, r.values) {
            (LayerKind::MaskGrid, LayerValues::Scalar(v)) if v.is_empty() => LayerValues::Mask(Vec::new()),
            (_, v) => v,
        };
        if values.kind() != r.kind {
            return Err(LayerError::KindMismatch { declared: r.kind });
        }
        Layer::new(&r.name, values, r.produced_from_version, &r.producer)
    }
}

impl From<Layer> for LayerRecord {
    fn from(l: Layer) -> Self {
        LayerRecord {
            name: l.name,
            kind: l.values.kind(),
            values: l.values,
            produced_from_version: l.produced_from_version,
            producer: l.producer,
        }
    }
}

pub fn is_valid_layer_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= MAX_LAYER_NAME_LEN
        && name.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl Layer {
    pub fn new(name: &str, values: LayerValues, produced_from_version: u64, producer: &str) -> Result<Self, LayerError> {
        if !is_valid_layer_name(name) {
            return Err(LayerError::InvalidName(name.into()));
        }
        let finite = match &values {
            LayerValues::Scalar(v) => v.iter().all(|x| x.is_finite()),
            LayerValues::Mask(_) => true,
            LayerValues::Metrics(m) => m.values().all(|x| x.is_finite()),
        };
        if !finite {
            return Err(LayerError::NonFinite);
        }
        Ok(Layer {
            name: name.into(),
            values,
            produced_from_version,
            producer: producer.into(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn kind(&self) -> LayerKind {
        self.values.kind()
    }
    pub fn values(&self) -> &LayerValues {
        &self.values
    }
    pub fn produced_from_version(&self) -> u64 {
        self.produced_from_version
    }
    pub fn producer(&self) -> &str {
        &self.producer
    }

    pub fn scalars(&self) -> Option<&[f64]> {
        match &self.values {
            LayerValues::Scalar(v) => Some(v),
            _ => None,
        }
    }

    pub fn mask(&self) -> Option<&[bool]> {
        match &self.values {
            LayerValues::Mask(v) => Some(v),
            _ => None,
        }
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        match &self.values {
            LayerValues::Metrics(m) => m.get(key).copied(),
            _ => None,
        }
    }

    /// Grid layers must cover the table exactly.
    pub fn check_dimensions(&self, spec: &TableSpec) -> Result<(), LayerError> {
        match self.values.grid_len() {
            Some(n) if n != spec.cell_count() => Err(LayerError::DimensionMismatch {
                expected: spec.cell_count(),
                actual: n,
            }),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{from_canonical, to_canonical_string};
    use alloc::vec;

    #[test]
    fn encodes_kind_before_values() {
        let l = Layer::new("shadow", LayerValues::Mask(vec![true, false]), 3, "worker").unwrap();
        let s = to_canonical_string(&l);
        assert_eq!(
            s,
            r#"{"name":"shadow","kind":"mask_grid","values":[true,false],"produced_from_version":3,"producer":"worker"}"#
        );
        assert_eq!(from_canonical::<Layer>(s.as_bytes()).unwrap(), l);
    }

    #[test]
    fn kind_must_match_values() {
        let bad = br#"{"name":"x","kind":"metrics","values":[1.0],"produced_from_version":1,"producer":"w"}"#;
        assert!(from_canonical::<Layer>(bad).is_err());
        let empty_mask = br#"{"name":"x","kind":"mask_grid","values":[],"produced_from_version":1,"producer":"w"}"#;
        assert_eq!(from_canonical::<Layer>(empty_mask).unwrap().kind(), LayerKind::MaskGrid);
    }

    #[test]
    fn rejects_bad_names_and_values() {
        assert!(Layer::new("Bad Name", LayerValues::Scalar(vec![]), 1, "w").is_err());
        assert_eq!(
            Layer::new("h", LayerValues::Scalar(vec![f64::NAN]), 1, "w"),
            Err(LayerError::NonFinite)
        );
    }

    #[test]
    fn dimension_check() {
        let spec = crate::spec::TableSpecDraft::new("t", 2, 2).validate().unwrap();
        let l = Layer::new("h", LayerValues::Scalar(vec![0.0; 3]), 1, "w").unwrap();
        assert_eq!(l.check_dimensions(&spec), Err(LayerError::DimensionMismatch { expected: 4, actual: 3 }));
        let m = Layer::new("d", LayerValues::Metrics(BTreeMap::new()), 1, "w").unwrap();
        assert!(m.check_dimensions(&spec).is_ok());
    }
}
