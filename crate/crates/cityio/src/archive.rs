//! Table export files: the canonical spec on the first line, then the
//! commit log exactly as stored.

use std::fs;
use std::path::Path;

use cityio_core::encoding::{from_canonical, to_canonical_string};
use cityio_core::history::{replay, verify_chain, BreakReason, ChainError, ChainReport};
use cityio_core::spec::TableSpec;
use thiserror::Error;

use crate::store::{log_path, read_spec, spec_path, write_new_table, StoreError};

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("export file is empty")]
    Empty,
    #[error("line 1: invalid table spec: {0}")]
    BadSpec(String),
    #[error("table {0:?} already exists")]
    Exists(String),
    /// `record` counts commit lines, so line numbers in the file are one
    /// higher.
    #[error("chain broken: {0}")]
    Chain(#[from] ChainError),
    #[error("export file ends with an incomplete record")]
    Truncated,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// The export of table `name` in `dir`. The log is cut to its last
/// complete record.
pub fn export_table(dir: &Path, name: &str) -> Result<Vec<u8>, ArchiveError> {
    let spec = read_spec(dir, name)?;
    let lp = log_path(dir, name);
    let log = fs::read(&lp).map_err(|source| StoreError::Io { path: lp, source })?;
    let parsed = replay(&log, Some(&spec))
        .map_err(|source| StoreError::ChainBroken { table: name.into(), source })?;
    let mut out = to_canonical_string(&spec).into_bytes();
    out.push(b'\n');
    out.extend_from_slice(&log[..parsed.valid_len]);
    if parsed.needs_newline {
        out.push(b'\n');
    }
    Ok(out)
}

/// Splits an export into its spec and commit log.
pub fn split_export(bytes: &[u8]) -> Result<(TableSpec, &[u8]), ArchiveError> {
    if bytes.is_empty() {
        return Err(ArchiveError::Empty);
    }
    let (first, rest) = match bytes.iter().position(|b| *b == b'\n') {
        Some(i) => (&bytes[..i], &bytes[i + 1..]),
        None => (bytes, &[][..]),
    };
    let spec: TableSpec = from_canonical(first).map_err(|e| ArchiveError::BadSpec(e.to_string()))?;
    if to_canonical_string(&spec).as_bytes() != first {
        return Err(ArchiveError::BadSpec("spec line is not canonically encoded".into()));
    }
    Ok((spec, rest))
}

/// Checks an export without importing it.
pub fn verify_export(bytes: &[u8]) -> Result<(TableSpec, ChainReport), ArchiveError> {
    let (spec, log) = split_export(bytes)?;
    let report = verify_chain(log, Some(&spec))?;
    if report.discarded_tail {
        return Err(ArchiveError::Truncated);
    }
    Ok((spec, report))
}

/// Creates a table in `dir` from an export. Returns the table spec and the
/// number of commits.
pub fn import_table(dir: &Path, bytes: &[u8]) -> Result<(TableSpec, usize), ArchiveError> {
    let (spec, report) = verify_export(bytes)?;
    if report.records == 0 {
        return Err(ArchiveError::Chain(ChainError {
            record: 1,
            reason: BreakReason::Invalid("export holds no commits".into()),
        }));
    }
    if spec_path(dir, spec.name()).exists() || log_path(dir, spec.name()).exists() {
        return Err(ArchiveError::Exists(spec.name().into()));
    }
    let (_, log) = split_export(bytes)?;
    fs::create_dir_all(dir).map_err(|source| StoreError::Io { path: dir.to_path_buf(), source })?;
    write_new_table(dir, &spec, log)?;
    Ok((spec, report.records))
}

/// Counts the records of a raw commit log or export, verifying the chain.
pub fn verify_file(bytes: &[u8]) -> Result<ChainReport, ArchiveError> {
    // an export starts with a spec line, a raw log with a commit
    let first = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
    let first_is_spec = from_canonical::<TableSpec>(first).is_ok();
    if first_is_spec {
        verify_export(bytes).map(|(_, r)| r)
    } else {
        Ok(verify_chain(bytes, None)?)
    }
}
