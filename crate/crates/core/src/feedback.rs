//! Comments anchored to cells or coordinates, idempotent likes, ranking and
//! the comment-density heatmap.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::geo_to_cell;
use crate::layer::{Layer, LayerValues};
use crate::spec::TableSpec;

pub const MAX_TEXT_CHARS: usize = 500;
pub const MAX_AUTHOR_CHARS: usize = 64;
pub const HEATMAP_LAYER: &str = "comment_heatmap";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Anchor {
    Cell { col: u32, row: u32 },
    Geo { lat: f64, lon: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comment {
    pub id: u64,
    pub anchor: Anchor,
    pub text: String,
    pub author: String,
    pub created_at_ms: u64,
    pub version_at_creation: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reaction {
    pub comment_id: u64,
    pub author: String,
}

/// One line of a table's feedback log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FeedbackRecord {
    Comment(Comment),
    Reaction(Reaction),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankedComment {
    pub comment: Comment,
    pub like_count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FeedbackError {
    #[error("comment text is empty")]
    EmptyText,
    #[error("comment text has {0} characters, limit is {MAX_TEXT_CHARS}")]
    TextTooLong(usize),
    #[error("anchor is outside the table or not finite")]
    InvalidAnchor,
    #[error("author must be 1..={MAX_AUTHOR_CHARS} characters")]
    InvalidAuthor,
    #[error("no comment with id {0}")]
    UnknownComment(u64),
    #[error("comment id {found} out of sequence, expected {expected}")]
    OutOfSequence { expected: u64, found: u64 },
}

fn normalize_author(author: &str) -> Result<String, FeedbackError> {
    let a = author.trim();
    if a.is_empty() || a.chars().count() > MAX_AUTHOR_CHARS {
        return Err(FeedbackError::InvalidAuthor);
    }
    Ok(a.into())
}

fn check_anchor(spec: &TableSpec, anchor: &Anchor) -> Result<(), FeedbackError> {
    let ok = match *anchor {
        Anchor::Cell { col, row } => spec.index(col, row).is_some(),
        Anchor::Geo { lat, lon } => lat.is_finite() && lon.is_finite(),
    };
    ok.then_some(()).ok_or(FeedbackError::InvalidAnchor)
}

/// Ranking order: most liked first, then oldest, then lowest id.
pub fn rank_order(a: &RankedComment, b: &RankedComment) -> Ordering {
    b.like_count
        .cmp(&a.like_count)
        .then(a.comment.created_at_ms.cmp(&b.comment.created_at_ms))
        .then(a.comment.id.cmp(&b.comment.id))
}

/// Heatmap plus the number of geo comments that fell outside the table.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub layer: Layer,
    pub excluded: usize,
}

/// In-memory feedback state for one table.
///
/// Mutations are split into `prepare_*` (validate, assign ids, no change)
/// and `insert_*` (apply), so a caller can persist in between.
#[derive(Clone, Debug, Default)]
pub struct FeedbackBook {
    comments: Vec<Comment>,
    likes: BTreeMap<u64, BTreeSet<String>>,
}

impl FeedbackBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn get(&self, id: u64) -> Option<&Comment> {
        let i = usize::try_from(id.checked_sub(1)?).ok()?;
        self.comments.get(i)
    }

    pub fn like_count(&self, id: u64) -> u64 {
        self.likes.get(&id).map_or(0, |s| s.len() as u64)
    }

    pub fn next_id(&self) -> u64 {
        self.comments.len() as u64 + 1
    }

    /// Builds the next comment without storing it.
    pub fn prepare_comment(
        &self,
        spec: &TableSpec,
        anchor: Anchor,
        text: &str,
        author: &str,
        now_ms: u64,
        head_version: u64,
    ) -> Result<Comment, FeedbackError> {
        if text.trim().is_empty() {
            return Err(FeedbackError::EmptyText);
        }
        let chars = text.chars().count();
        if chars > MAX_TEXT_CHARS {
            return Err(FeedbackError::TextTooLong(chars));
        }
        let author = normalize_author(author)?;
        check_anchor(spec, &anchor)?;
        let created_at_ms = self.comments.last().map_or(now_ms, |c| now_ms.max(c.created_at_ms));
        Ok(Comment {
            id: self.next_id(),
            anchor,
            text: text.into(),
            author,
            created_at_ms,
            version_at_creation: head_version,
        })
    }

    pub fn insert_comment(&mut self, comment: Comment) -> Result<(), FeedbackError> {
        if comment.id != self.next_id() {
            return Err(FeedbackError::OutOfSequence {
                expected: self.next_id(),
                found: comment.id,
            });
        }
        self.comments.push(comment);
        Ok(())
    }

    /// `Ok(None)` when this author already liked the comment.
    pub fn prepare_reaction(&self, comment_id: u64, author: &str) -> Result<Option<Reaction>, FeedbackError> {
        if self.get(comment_id).is_none() {
            return Err(FeedbackError::UnknownComment(comment_id));
        }
        let author = normalize_author(author)?;
        if self.likes.get(&comment_id).is_some_and(|s| s.contains(&author)) {
            return Ok(None);
        }
        Ok(Some(Reaction { comment_id, author }))
    }

    /// Records a like and returns the new count. Duplicates are absorbed.
    pub fn insert_reaction(&mut self, reaction: Reaction) -> Result<u64, FeedbackError> {
        if self.get(reaction.comment_id).is_none() {
            return Err(FeedbackError::UnknownComment(reaction.comment_id));
        }
        let set = self.likes.entry(reaction.comment_id).or_default();
        set.insert(reaction.author);
        Ok(set.len() as u64)
    }

    pub fn apply(&mut self, record: FeedbackRecord) -> Result<(), FeedbackError> {
        match record {
            FeedbackRecord::Comment(c) => self.insert_comment(c),
            FeedbackRecord::Reaction(r) => self.insert_reaction(r).map(|_| ()),
        }
    }

    /// The `k` highest-ranked comments.
    pub fn top(&self, k: usize) -> Vec<RankedComment> {
        let mut all: Vec<RankedComment> = self
            .comments
            .iter()
            .map(|c| RankedComment {
                comment: c.clone(),
                like_count: self.like_count(c.id),
            })
            .collect();
        all.sort_by(rank_order);
        all.truncate(k);
        all
    }

    /// Comment counts per cell. Geo comments outside the table are left out.
    pub fn heatmap(&self, spec: &TableSpec, head_version: u64) -> Heatmap {
        let mut counts = vec![0.0f64; spec.cell_count()];
        let mut excluded = 0;
        for c in &self.comments {
            let cell = match c.anchor {
                Anchor::Cell { col, row } => spec.index(col, row),
                Anchor::Geo { lat, lon } => geo_to_cell(spec, lat, lon)
                    .ok()
                    .and_then(|p| spec.index(p.col, p.row)),
            };
            match cell {
                Some(i) => counts[i] += 1.0,
                None => excluded += 1,
            }
        }
        let layer = Layer::new(HEATMAP_LAYER, LayerValues::Scalar(counts), head_version, "feedback")
            .expect("counts are finite");
        Heatmap { layer, excluded }
    }
}
