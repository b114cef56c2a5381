//! Hash-chained commit records and log verification.
//!
//! A table's history is a newline-delimited log with one canonical
//! [`Commit`] per line. Each commit hash covers
//!
//! ```text
//! parent_hash (32 bytes) ‖ version (u64 BE) ‖ timestamp_ms (u64 BE)
//!   ‖ len(grid) (u64 BE) ‖ canonical grid ‖ len(author) (u64 BE) ‖ author ‖ source
//! ```
//!
//! so every byte of a record is either hashed or structurally checked.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::digest::Digest;
use crate::encoding::{encode_grid, to_canonical, EncodingError};
use crate::grid::{GridError, GridState};
use crate::spec::TableSpec;

pub const MAX_AUTHOR_CHARS: usize = 64;

/// Which kind of client produced a commit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Table,
    Ui,
    Worker,
    Cli,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Table => "table",
            Source::Ui => "ui",
            Source::Worker => "worker",
            Source::Cli => "cli",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Commit {
    pub version: u64,
    pub parent_hash: Digest,
    pub grid_hash: Digest,
    pub commit_hash: Digest,
    pub author: String,
    pub source: Source,
    pub timestamp_ms: u64,
    pub grid: GridState,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("author must be at most {MAX_AUTHOR_CHARS} characters")]
pub struct AuthorTooLong;

pub fn commit_hash(
    parent: &Digest,
    version: u64,
    timestamp_ms: u64,
    grid_bytes: &[u8],
    author: &str,
    source: Source,
) -> Digest {
    let mut h = Sha256::new();
    h.update(parent.0);
    h.update(version.to_be_bytes());
    h.update(timestamp_ms.to_be_bytes());
    h.update((grid_bytes.len() as u64).to_be_bytes());
    h.update(grid_bytes);
    h.update((author.len() as u64).to_be_bytes());
    h.update(author.as_bytes());
    h.update(source.as_str().as_bytes());
    Digest(h.finalize().into())
}

impl Commit {
    fn build(
        version: u64,
        parent_hash: Digest,
        grid: GridState,
        author: &str,
        source: Source,
        timestamp_ms: u64,
    ) -> Result<Commit, AuthorTooLong> {
        if author.chars().count() > MAX_AUTHOR_CHARS {
            return Err(AuthorTooLong);
        }
        let grid_bytes = encode_grid(&grid);
        Ok(Commit {
            version,
            parent_hash,
            grid_hash: Digest::of(&grid_bytes),
            commit_hash: commit_hash(&parent_hash, version, timestamp_ms, &grid_bytes, author, source),
            author: author.into(),
            source,
            timestamp_ms,
            grid,
        })
    }

    /// Version 1 with an all-zero parent.
    pub fn genesis(grid: GridState, author: &str, source: Source, timestamp_ms: u64) -> Result<Commit, AuthorTooLong> {
        Self::build(1, Digest::ZERO, grid, author, source, timestamp_ms)
    }

    /// The successor of `self`. Timestamps are clamped so they never go
    /// backwards along the chain.
    pub fn child(&self, grid: GridState, author: &str, source: Source, timestamp_ms: u64) -> Result<Commit, AuthorTooLong> {
        Self::build(
            self.version + 1,
            self.commit_hash,
            grid,
            author,
            source,
            timestamp_ms.max(self.timestamp_ms),
        )
    }

    /// Canonical record bytes, without the trailing newline.
    pub fn encode(&self) -> Vec<u8> {
        to_canonical(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BreakReason {
    Malformed { truncated: bool },
    NotCanonical,
    VersionGap { expected: u64, found: u64 },
    ParentMismatch,
    GridHashMismatch,
    CommitHashMismatch,
    TimestampRegression,
    AuthorTooLong,
    InvalidGrid(GridError),
    Invalid(String),
}

impl fmt::Display for BreakReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BreakReason::Malformed { truncated: true } => f.write_str("record ends mid-value"),
            BreakReason::Malformed { truncated: false } => f.write_str("malformed record"),
            BreakReason::NotCanonical => f.write_str("record is not canonically encoded"),
            BreakReason::VersionGap { expected, found } => write!(f, "expected version {expected}, found {found}"),
            BreakReason::ParentMismatch => f.write_str("parent_hash does not match predecessor"),
            BreakReason::GridHashMismatch => f.write_str("grid_hash does not match grid"),
            BreakReason::CommitHashMismatch => f.write_str("commit_hash does not match contents"),
            BreakReason::TimestampRegression => f.write_str("timestamp earlier than predecessor"),
            BreakReason::AuthorTooLong => f.write_str("author too long"),
            BreakReason::InvalidGrid(e) => write!(f, "grid invalid for table: {e}"),
            BreakReason::Invalid(s) => f.write_str(s),
        }
    }
}

impl From<EncodingError> for BreakReason {
    fn from(e: EncodingError) -> Self {
        match e {
            EncodingError::Malformed { truncated, .. } => BreakReason::Malformed { truncated },
            EncodingError::SpecMismatch { expected, actual } => {
                BreakReason::InvalidGrid(GridError::LengthMismatch { expected, actual })
            }
            EncodingError::Invalid(g) => BreakReason::InvalidGrid(g),
        }
    }
}

/// A log failed verification at `record` (1-based line number).
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("chain broken at record {record}: {reason}")]
pub struct ChainError {
    pub record: usize,
    pub reason: BreakReason,
}

/// Records parsed from a newline-delimited log.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedLog<T> {
    pub records: Vec<T>,
    /// Length of the prefix holding complete records.
    pub valid_len: usize,
    /// An incomplete final record was dropped.
    pub discarded_tail: bool,
    /// The final record is complete but lacks its newline.
    pub needs_newline: bool,
}

/// Splits `log` into lines and runs `check` on each one.
///
/// An unterminated final line that fails only because the input ended
/// mid-value is treated as a torn write and dropped; any other failure is a
/// [`ChainError`] naming the line.
pub fn parse_log<T>(
    log: &[u8],
    mut check: impl FnMut(&[u8]) -> Result<T, BreakReason>,
) -> Result<ParsedLog<T>, ChainError> {
    let mut out = ParsedLog {
        records: Vec::new(),
        valid_len: 0,
        discarded_tail: false,
        needs_newline: false,
    };
    for (i, chunk) in log.split_inclusive(|b| *b == b'\n').enumerate() {
        let record = i + 1;
        let (line, terminated) = match chunk.split_last() {
            Some((b'\n', rest)) => (rest, true),
            _ => (chunk, false),
        };
        match check(line) {
            Ok(t) => {
                out.records.push(t);
                out.valid_len += chunk.len();
                out.needs_newline = !terminated;
            }
            Err(BreakReason::Malformed { truncated: true }) if !terminated => {
                out.discarded_tail = true;
            }
            Err(reason) => return Err(ChainError { record, reason }),
        }
    }
    Ok(out)
}

/// Parses one canonical record and rejects non-canonical byte layouts.
pub fn parse_canonical_record<T>(line: &[u8]) -> Result<T, BreakReason>
where
    T: serde::de::DeserializeOwned + Serialize,
{
    let value: T = crate::encoding::from_canonical(line)?;
    if to_canonical(&value) != line {
        return Err(BreakReason::NotCanonical);
    }
    Ok(value)
}

/// Incremental chain checker, fed one record at a time.
#[derive(Clone, Debug)]
pub struct ChainVerifier<'s> {
    spec: Option<&'s TableSpec>,
    prev: Option<(u64, Digest, u64)>,
}

impl<'s> ChainVerifier<'s> {
    pub fn new(spec: Option<&'s TableSpec>) -> Self {
        ChainVerifier { spec, prev: None }
    }

    pub fn check(&mut self, line: &[u8]) -> Result<Commit, BreakReason> {
        let commit: Commit = crate::encoding::from_canonical(line)?;
        let grid_bytes = encode_grid(&commit.grid);
        if commit.encode() != line {
            return Err(BreakReason::NotCanonical);
        }
        let (expected, parent, prev_ts) = match self.prev {
            Some((v, h, ts)) => (v + 1, h, ts),
            None => (1, Digest::ZERO, 0),
        };
        if commit.version != expected {
            return Err(BreakReason::VersionGap {
                expected,
                found: commit.version,
            });
        }
        if commit.parent_hash != parent {
            return Err(BreakReason::ParentMismatch);
        }
        if Digest::of(&grid_bytes) != commit.grid_hash {
            return Err(BreakReason::GridHashMismatch);
        }
        let recomputed = commit_hash(
            &commit.parent_hash,
            commit.version,
            commit.timestamp_ms,
            &grid_bytes,
            &commit.author,
            commit.source,
        );
        if recomputed != commit.commit_hash {
            return Err(BreakReason::CommitHashMismatch);
        }
        if commit.timestamp_ms < prev_ts {
            return Err(BreakReason::TimestampRegression);
        }
        if commit.author.chars().count() > MAX_AUTHOR_CHARS {
            return Err(BreakReason::AuthorTooLong);
        }
        if let Some(spec) = self.spec {
            commit.grid.validate(spec).map_err(BreakReason::InvalidGrid)?;
        }
        self.prev = Some((commit.version, commit.commit_hash, commit.timestamp_ms));
        Ok(commit)
    }
}

/// Result of replaying a commit log.
pub type Replayed = ParsedLog<Commit>;

impl ParsedLog<Commit> {
    pub fn head(&self) -> Option<&Commit> {
        self.records.last()
    }

    /// Grid at the head, if any commit exists.
    pub fn final_grid(&self) -> Option<&GridState> {
        self.head().map(|c| &c.grid)
    }
}

/// Rebuilds the commit chain from raw log bytes, verifying every record.
/// With `spec`, grids are also validated against the table's palette.
pub fn replay(log: &[u8], spec: Option<&TableSpec>) -> Result<Replayed, ChainError> {
    let mut verifier = ChainVerifier::new(spec);
    parse_log(log, |line| verifier.check(line))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainReport {
    pub records: usize,
    pub head_hash: Option<Digest>,
    pub discarded_tail: bool,
}

/// Checks versions, parent links, grid hashes and commit hashes of every record.
pub fn verify_chain(log: &[u8], spec: Option<&TableSpec>) -> Result<ChainReport, ChainError> {
    let mut verifier = ChainVerifier::new(spec);
    let mut head_hash = None;
    let parsed = parse_log(log, |line| {
        let c = verifier.check(line)?;
        head_hash = Some(c.commit_hash);
        Ok(())
    })?;
    Ok(ChainReport {
        records: parsed.records.len(),
        head_hash,
        discarded_tail: parsed.discarded_tail,
    })
}

/// Serializes commits into log bytes, one per line.
pub fn write_log<'a>(commits: impl IntoIterator<Item = &'a Commit>) -> Vec<u8> {
    let mut out = Vec::new();
    for c in commits {
        out.extend_from_slice(&c.encode());
        out.push(b'\n');
    }
    out
}
