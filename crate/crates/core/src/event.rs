//! Per-table event sequence and a client-side replica that follows it.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::state_hash;
use crate::feedback::Comment;
use crate::grid::{CellDiff, GridError, GridState};
use crate::history::Commit;
use crate::layer::Layer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Commit,
    Comment,
    Reaction,
    Layer,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Commit => "commit",
            EventKind::Comment => "comment",
            EventKind::Reaction => "reaction",
            EventKind::Layer => "layer",
        }
    }
}

/// A commit plus its delta against the previous version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitEvent {
    pub commit: Commit,
    pub diff: Vec<CellDiff>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionEvent {
    pub comment_id: u64,
    pub author: String,
    pub like_count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventBody {
    Commit(CommitEvent),
    Comment(Comment),
    Reaction(ReactionEvent),
    Layer(Layer),
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::Commit(_) => EventKind::Commit,
            EventBody::Comment(_) => EventKind::Comment,
            EventBody::Reaction(_) => EventKind::Reaction,
            EventBody::Layer(_) => EventKind::Layer,
        }
    }
}

/// Encoded as `{"seq":..,"kind":..,"payload":{..}}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub seq: u64,
    pub body: EventBody,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}

impl Serialize for Event {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Event", 3)?;
        st.serialize_field("seq", &self.seq)?;
        st.serialize_field("kind", &self.kind())?;
        match &self.body {
            EventBody::Commit(p) => st.serialize_field("payload", p)?,
            EventBody::Comment(p) => st.serialize_field("payload", p)?,
            EventBody::Reaction(p) => st.serialize_field("payload", p)?,
            EventBody::Layer(p) => st.serialize_field("payload", p)?,
        }
        st.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    seq: u64,
    kind: EventKind,
    payload: serde_json::Value,
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawEvent::deserialize(d)?;
        let p = raw.payload;
        let body = match raw.kind {
            EventKind::Commit => serde_json::from_value(p).map(EventBody::Commit),
            EventKind::Comment => serde_json::from_value(p).map(EventBody::Comment),
            EventKind::Reaction => serde_json::from_value(p).map(EventBody::Reaction),
            EventKind::Layer => serde_json::from_value(p).map(EventBody::Layer),
        }
        .map_err(|e| de::Error::custom(e.to_string()))?;
        Ok(Event { seq: raw.seq, body })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReplicaError {
    #[error("event gap: expected seq {expected}, got {found}")]
    Gap { expected: u64, found: u64 },
    #[error("replica diverged at version {version}")]
    HashMismatch { version: u64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Local copy of a table's head grid, kept current from the event stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Replica {
    pub version: u64,
    pub grid: GridState,
    /// Highest event seq applied.
    pub seq: u64,
}

impl Replica {
    /// Starts from a known commit whose events up to `seq` are already reflected.
    pub fn new(head: &Commit, seq: u64) -> Self {
        Replica {
            version: head.version,
            grid: head.grid.clone(),
            seq,
        }
    }

    /// Applies the next event. Returns `false` for an already-seen seq.
    pub fn apply(&mut self, event: &Event) -> Result<bool, ReplicaError> {
        if event.seq <= self.seq {
            return Ok(false);
        }
        if event.seq != self.seq + 1 {
            return Err(ReplicaError::Gap {
                expected: self.seq + 1,
                found: event.seq,
            });
        }
        if let EventBody::Commit(ce) = &event.body {
            let c = &ce.commit;
            if c.version == self.version + 1 {
                let next = self.grid.apply_diff(&ce.diff)?;
                if state_hash(&next) != c.grid_hash {
                    return Err(ReplicaError::HashMismatch { version: c.version });
                }
                self.grid = next;
                self.version = c.version;
            } else if c.version > self.version {
                self.grid = c.grid.clone();
                self.version = c.version;
            }
        }
        self.seq = event.seq;
        Ok(true)
    }
}
