//! Canonical textual encoding.
//!
//! Objects are brace-delimited key/value maps with lowercase snake_case keys
//! in declaration order, base-10 integers, shortest round-trip decimal floats
//! and no insignificant whitespace. Syntactically this is compact JSON, so
//! any JSON reader can consume it; equal values always encode to identical
//! bytes, which is what hashing relies on.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{GridError, GridState};
use crate::spec::TableSpec;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EncodingError {
    #[error("malformed encoding: {detail}")]
    Malformed {
        detail: String,
        /// The input ended in the middle of a value.
        truncated: bool,
    },
    #[error("decoded grid has {actual} cells, spec expects {expected}")]
    SpecMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Invalid(#[from] GridError),
}

impl From<serde_json::Error> for EncodingError {
    fn from(e: serde_json::Error) -> Self {
        EncodingError::Malformed {
            truncated: e.is_eof(),
            detail: e.to_string(),
        }
    }
}

/// Canonical bytes of any value in this crate's model.
pub fn to_canonical<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    // Only maps with non-string keys or failing custom Serialize impls can
    // error, and the model has neither.
    serde_json::to_vec(value).expect("model types always serialize")
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(value).expect("model types always serialize")
}

pub fn from_canonical<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, EncodingError> {
    Ok(serde_json::from_slice(bytes)?)
}

pub fn encode_grid(state: &GridState) -> Vec<u8> {
    to_canonical(state)
}

/// Decodes and validates a grid against `spec`.
pub fn decode_grid(bytes: &[u8], spec: &TableSpec) -> Result<GridState, EncodingError> {
    let state: GridState = from_canonical(bytes)?;
    if state.len() != spec.cell_count() {
        return Err(EncodingError::SpecMismatch {
            expected: spec.cell_count(),
            actual: state.len(),
        });
    }
    state.validate(spec)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{new_grid, Cell, CellEdit, Rotation};
    use crate::spec::TableSpecDraft;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn spec(n: u32) -> TableSpec {
        TableSpecDraft::new("t", n, n).validate().unwrap()
    }

    pub(crate) fn random_grid(rng: &mut impl Rng, spec: &TableSpec) -> GridState {
        let cells = (0..spec.cell_count())
            .map(|_| {
                let type_id = rng.random_range(0..6u16);
                let rotation = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270][rng.random_range(0..4)];
                let floors = (type_id == 1 && rng.random_bool(0.3)).then(|| rng.random_range(0..30));
                Cell { type_id, rotation, floors }
            })
            .collect();
        GridState::from_cells(spec, cells).unwrap()
    }

    #[test]
    fn layout_is_fixed() {
        let s = spec(2);
        let g = new_grid(&s)
            .apply_edits(&s, &[CellEdit::new(1, Cell::of_type(1).with_floors(7).with_rotation(Rotation::R90))])
            .unwrap();
        assert_eq!(
            String::from_utf8(encode_grid(&g)).unwrap(),
            r#"{"cells":[{"type_id":0,"rotation":0},{"type_id":1,"rotation":90,"floors":7},{"type_id":0,"rotation":0},{"type_id":0,"rotation":0}]}"#
        );
        assert_eq!(encode_grid(&new_grid(&s)), encode_grid(&new_grid(&s)));
    }

    #[test]
    fn round_trips_random_states() {
        let s = spec(8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let g = random_grid(&mut rng, &s);
            assert_eq!(decode_grid(&encode_grid(&g), &s).unwrap(), g);
        }
    }

    #[test]
    fn truncated_input_is_malformed() {
        let s = spec(2);
        let bytes = encode_grid(&new_grid(&s));
        for cut in [0, 1, bytes.len() / 2, bytes.len() - 1] {
            match decode_grid(&bytes[..cut], &s) {
                Err(EncodingError::Malformed { truncated, .. }) => assert!(truncated),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn spec_mismatch_and_invalid_cells() {
        let bytes = encode_grid(&new_grid(&spec(2)));
        assert_eq!(
            decode_grid(&bytes, &spec(3)),
            Err(EncodingError::SpecMismatch { expected: 9, actual: 4 })
        );
        let bad = br#"{"cells":[{"type_id":9,"rotation":0}]}"#;
        assert!(matches!(
            decode_grid(bad, &spec(1)),
            Err(EncodingError::Invalid(GridError::UnknownTypeId { .. }))
        ));
        let bad_rot = br#"{"cells":[{"type_id":0,"rotation":45}]}"#;
        assert!(matches!(decode_grid(bad_rot, &spec(1)), Err(EncodingError::Malformed { .. })));
    }

    #[test]
    fn never_panics_on_garbage() {
        let s = spec(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let len = rng.random_range(0..64);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let _ = decode_grid(&bytes, &s);
        }
    }

    #[test]
    fn encoding_is_injective_over_random_states() {
        let s = spec(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        let mut seen: HashMap<Vec<u8>, GridState> = HashMap::new();
        for _ in 0..10_000 {
            let g = random_grid(&mut rng, &s);
            let bytes = encode_grid(&g);
            if let Some(prev) = seen.get(&bytes) {
                assert_eq!(prev, &g, "two distinct states share an encoding");
            }
            seen.insert(bytes, g);
        }
    }
}
