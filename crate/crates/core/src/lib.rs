//! Domain model and pure algorithms for a collaborative urban-design grid
//! server: table specs and grid states, canonical encoding and hashing, the
//! hash-chained commit format, geo anchoring, feedback aggregation and the
//! analysis layers published by compute workers.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem or the network lives in the `cityio` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod digest;
pub mod encoding;
pub mod event;
pub mod feedback;
pub mod geo;
pub mod grid;
pub mod history;
pub mod layer;
pub mod spec;

pub use digest::{state_hash, Digest};
pub use encoding::EncodingError;
pub use event::{CommitEvent, Event, EventBody, EventKind, ReactionEvent, Replica};
pub use feedback::{Anchor, Comment, FeedbackBook, FeedbackError, FeedbackRecord, RankedComment, Reaction};
pub use geo::{cell_to_geo, geo_to_cell, CellCoord, GeoError, LatLon};
pub use grid::{new_grid, Cell, CellDiff, CellEdit, GridError, GridState, Rotation};
pub use history::{BreakReason, ChainError, Commit, Replayed, Source};
pub use layer::{Layer, LayerError, LayerKind, LayerValues};
pub use spec::{Category, CellType, SpecError, TableSpec, TableSpecDraft};
