//! Durable tables under a data directory.
//!
//! Each table keeps four files:
//!
//! - `<name>.spec`: the table spec, one canonical line
//! - `<name>.log`: the commit chain, one canonical commit per line
//! - `<name>.comments.log`: comments and first-time likes
//! - `<name>.events.log`: the table's event sequence, including layer events
//!
//! Every append is flushed to disk before the mutation is acknowledged. A
//! mutation writes its primary record first and its event second, so after a
//! crash the event log can only be missing a suffix, which is rebuilt on load.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use cityio_core::encoding::{from_canonical, to_canonical};
use cityio_core::feedback::{Anchor, Comment, FeedbackBook, FeedbackError, FeedbackRecord, Heatmap, RankedComment};
use cityio_core::history::{parse_canonical_record, parse_log, replay, BreakReason, ChainError, Source};
use cityio_core::spec::{is_valid_table_name, SpecError, TableSpec};
use cityio_core::{
    new_grid, state_hash, CellEdit, Commit, CommitEvent, Event, EventBody, EventKind, GridError, GridState, Layer,
    LayerError, ReactionEvent,
};
use thiserror::Error;
use tokio::sync::broadcast;
use tracing::{error, info, warn};

/// Events buffered per subscriber before it is considered too slow.
pub const SUBSCRIBER_BUFFER: usize = 4096;

/// Largest commit range served in one request.
pub const MAX_RANGE: u64 = 500;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no table named {0:?}")]
    UnknownTable(String),
    #[error("table {0:?} already exists")]
    TableExists(String),
    #[error("invalid table spec: {0}")]
    InvalidSpec(#[from] SpecError),
    #[error("table {table:?} has no version {version}")]
    UnknownVersion { table: String, version: u64 },
    #[error("invalid range {from}..={to}")]
    InvalidRange { from: u64, to: u64 },
    #[error("range of {0} commits exceeds the limit of {MAX_RANGE}")]
    RangeTooLarge(u64),
    #[error(transparent)]
    InvalidGrid(#[from] GridError),
    #[error("edit lists need a base_version")]
    EditsNeedBase,
    #[error("author must be at most 64 characters")]
    AuthorTooLong,
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error(transparent)]
    InvalidLayer(#[from] LayerError),
    #[error("layer produced from version {version}, head is {head}")]
    LayerVersion { version: u64, head: u64 },
    #[error("stored layer {name:?} is from version {stored}, offered {offered}")]
    StaleLayer { name: String, stored: u64, offered: u64 },
    #[error("since {since} is beyond the latest event {max}")]
    SinceAhead { since: u64, max: u64 },
    #[error("table {0:?} is read-only after a storage failure")]
    ReadOnly(String),
    #[error("table {table:?}: {source}")]
    ChainBroken { table: String, source: ChainError },
    #[error("{path}: record {record}: {detail}")]
    Corrupt { path: PathBuf, record: usize, detail: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl StoreError {
    /// Damaged files, as opposed to bad requests or IO trouble.
    pub fn is_integrity(&self) -> bool {
        matches!(self, StoreError::ChainBroken { .. } | StoreError::Corrupt { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

pub fn spec_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.spec"))
}

pub fn log_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.log"))
}

pub fn comments_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.comments.log"))
}

pub fn events_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.events.log"))
}

struct LogFile {
    path: PathBuf,
    file: File,
}

impl LogFile {
    fn open(path: PathBuf) -> Result<Self, StoreError> {
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        Ok(LogFile { path, file })
    }

    fn append(&mut self, record: &[u8]) -> Result<(), StoreError> {
        let mut line = Vec::with_capacity(record.len() + 1);
        line.extend_from_slice(record);
        line.push(b'\n');
        self.file.write_all(&line).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }
}

/// Cuts a torn final record and restores a missing final newline.
fn repair_tail(path: &Path, len: usize, valid_len: usize, needs_newline: bool) -> Result<(), StoreError> {
    if valid_len < len {
        warn!(path = %path.display(), dropped = len - valid_len, "discarding incomplete final record");
        let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        f.set_len(valid_len as u64).map_err(io_err(path))?;
        f.sync_data().map_err(io_err(path))?;
    }
    if needs_newline {
        let mut f = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
        f.write_all(b"\n").map_err(io_err(path))?;
        f.sync_data().map_err(io_err(path))?;
    }
    Ok(())
}

fn read_or_empty(path: &Path) -> Result<Vec<u8>, StoreError> {
    match fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// One entry of a table's event sequence, with its encoded form.
#[derive(Debug)]
pub struct StoredEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub line: Arc<str>,
}

impl StoredEvent {
    fn new(event: &Event) -> Arc<Self> {
        let line = String::from_utf8(to_canonical(event)).expect("canonical encoding is UTF-8");
        Arc::new(StoredEvent { seq: event.seq, kind: event.kind(), line: line.into() })
    }
}

#[derive(Debug)]
pub enum GridChange {
    Full(GridState),
    Edits(Vec<CellEdit>),
}

#[derive(Debug)]
pub enum CommitOutcome {
    Created(Arc<Commit>),
    /// The grid equals the head's; nothing was written.
    Unchanged(Arc<Commit>),
    /// `base_version` is not the head.
    Conflict(Arc<Commit>),
}

/// Where a subscriber starts.
pub struct Subscription {
    /// Stored events after `since`, oldest first.
    pub backlog: Vec<Arc<StoredEvent>>,
    /// Head and latest seq, when no `since` was given.
    pub snapshot: Option<(u64, Arc<Commit>)>,
    pub live: broadcast::Receiver<Arc<StoredEvent>>,
}

#[derive(Default)]
struct View {
    commits: Vec<Arc<Commit>>,
    book: FeedbackBook,
    layers: BTreeMap<String, Arc<Layer>>,
    events: Vec<Arc<StoredEvent>>,
}

impl View {
    fn head(&self) -> &Arc<Commit> {
        self.commits.last().expect("tables always hold a genesis commit")
    }

    fn next_seq(&self) -> u64 {
        self.events.len() as u64 + 1
    }
}

struct Writer {
    commits: LogFile,
    feedback: LogFile,
    events: LogFile,
    failed: bool,
}

pub struct Table {
    spec: TableSpec,
    writer: Mutex<Writer>,
    view: RwLock<View>,
    live: broadcast::Sender<Arc<StoredEvent>>,
}

impl Table {
    pub fn spec(&self) -> &TableSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        self.spec.name()
    }

    pub fn head(&self) -> Arc<Commit> {
        self.view.read().unwrap().head().clone()
    }

    pub fn commit(&self, version: u64) -> Result<Arc<Commit>, StoreError> {
        let view = self.view.read().unwrap();
        version
            .checked_sub(1)
            .and_then(|i| view.commits.get(i as usize))
            .cloned()
            .ok_or_else(|| StoreError::UnknownVersion { table: self.name().into(), version })
    }

    /// Commits `from..=to`.
    pub fn commits(&self, from: u64, to: u64) -> Result<Vec<Arc<Commit>>, StoreError> {
        if from == 0 || from > to {
            return Err(StoreError::InvalidRange { from, to });
        }
        if to - from + 1 > MAX_RANGE {
            return Err(StoreError::RangeTooLarge(to - from + 1));
        }
        let view = self.view.read().unwrap();
        if to > view.commits.len() as u64 {
            return Err(StoreError::UnknownVersion { table: self.name().into(), version: to });
        }
        Ok(view.commits[(from - 1) as usize..to as usize].to_vec())
    }

    pub fn max_seq(&self) -> u64 {
        self.view.read().unwrap().events.len() as u64
    }

    pub fn top_comments(&self, k: usize) -> Vec<RankedComment> {
        self.view.read().unwrap().book.top(k)
    }

    pub fn comment_count(&self) -> usize {
        self.view.read().unwrap().book.len()
    }

    pub fn heatmap(&self) -> Heatmap {
        let view = self.view.read().unwrap();
        view.book.heatmap(&self.spec, view.head().version)
    }

    pub fn layer(&self, name: &str) -> Option<Arc<Layer>> {
        self.view.read().unwrap().layers.get(name).cloned()
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.view.read().unwrap().layers.keys().cloned().collect()
    }

    pub fn subscribe(&self, since: Option<u64>) -> Result<Subscription, StoreError> {
        // holding the read lock keeps publishers out until the receiver exists
        let view = self.view.read().unwrap();
        let max = view.events.len() as u64;
        let live = self.live.subscribe();
        match since {
            Some(since) if since > max => Err(StoreError::SinceAhead { since, max }),
            Some(since) => Ok(Subscription { backlog: view.events[since as usize..].to_vec(), snapshot: None, live }),
            None => Ok(Subscription { backlog: Vec::new(), snapshot: Some((max, view.head().clone())), live }),
        }
    }

    fn lock_writer(&self) -> Result<std::sync::MutexGuard<'_, Writer>, StoreError> {
        let w = self.writer.lock().unwrap();
        if w.failed {
            return Err(StoreError::ReadOnly(self.name().into()));
        }
        Ok(w)
    }

    /// Appends `body` as the next event and publishes it. Runs with the
    /// writer lock held, after the primary record is durable.
    fn publish(&self, w: &mut Writer, body: EventBody, apply: impl FnOnce(&mut View)) -> u64 {
        let mut view = self.view.write().unwrap();
        let event = Event { seq: view.next_seq(), body };
        let stored = StoredEvent::new(&event);
        if let Err(e) = w.events.append(stored.line.as_bytes()) {
            // the primary record is durable; the event is rebuilt on next load
            error!(table = self.name(), error = %e, "event log append failed, table is now read-only");
            w.failed = true;
        }
        apply(&mut view);
        view.events.push(stored.clone());
        let _ = self.live.send(stored);
        event.seq
    }

    pub fn commit_grid(
        &self,
        change: GridChange,
        base_version: Option<u64>,
        author: &str,
        source: Source,
    ) -> Result<CommitOutcome, StoreError> {
        if author.chars().count() > cityio_core::history::MAX_AUTHOR_CHARS {
            return Err(StoreError::AuthorTooLong);
        }
        let mut w = self.lock_writer()?;
        let head = self.head();
        if let Some(base) = base_version {
            if base != head.version {
                return Ok(CommitOutcome::Conflict(head));
            }
        }
        let grid = match change {
            GridChange::Full(g) => {
                g.validate(&self.spec)?;
                g
            }
            GridChange::Edits(_) if base_version.is_none() => return Err(StoreError::EditsNeedBase),
            GridChange::Edits(edits) => head.grid.apply_edits(&self.spec, &edits)?,
        };
        if state_hash(&grid) == head.grid_hash {
            return Ok(CommitOutcome::Unchanged(head));
        }
        let diff = head.grid.diff(&grid)?;
        let commit = head.child(grid, author, source, now_ms()).map_err(|_| StoreError::AuthorTooLong)?;
        if let Err(e) = w.commits.append(&commit.encode()) {
            w.failed = true;
            return Err(e);
        }
        let commit = Arc::new(commit);
        let body = EventBody::Commit(CommitEvent { commit: (*commit).clone(), diff });
        let c = commit.clone();
        self.publish(&mut w, body, move |v| v.commits.push(c));
        Ok(CommitOutcome::Created(commit))
    }

    pub fn add_comment(&self, anchor: Anchor, text: &str, author: &str) -> Result<Comment, StoreError> {
        let mut w = self.lock_writer()?;
        let comment = {
            let view = self.view.read().unwrap();
            view.book.prepare_comment(&self.spec, anchor, text, author, now_ms(), view.head().version)?
        };
        if let Err(e) = w.feedback.append(&to_canonical(&FeedbackRecord::Comment(comment.clone()))) {
            w.failed = true;
            return Err(e);
        }
        let c = comment.clone();
        self.publish(&mut w, EventBody::Comment(comment.clone()), move |v| {
            v.book.insert_comment(c).expect("prepared comment takes the next id");
        });
        Ok(comment)
    }

    /// Likes a comment and returns its like count. Repeats change nothing.
    pub fn react(&self, comment_id: u64, author: &str) -> Result<u64, StoreError> {
        let mut w = self.lock_writer()?;
        let (reaction, count) = {
            let view = self.view.read().unwrap();
            let r = view.book.prepare_reaction(comment_id, author)?;
            (r, view.book.like_count(comment_id))
        };
        let Some(reaction) = reaction else {
            return Ok(count);
        };
        if let Err(e) = w.feedback.append(&to_canonical(&FeedbackRecord::Reaction(reaction.clone()))) {
            w.failed = true;
            return Err(e);
        }
        let body = EventBody::Reaction(ReactionEvent {
            comment_id,
            author: reaction.author.clone(),
            like_count: count + 1,
        });
        self.publish(&mut w, body, move |v| {
            v.book.insert_reaction(reaction).expect("comment exists");
        });
        Ok(count + 1)
    }

    /// Stores a layer unless a newer one of the same name is already held.
    /// Returns the event seq.
    pub fn put_layer(&self, layer: Layer) -> Result<u64, StoreError> {
        layer.check_dimensions(&self.spec)?;
        let mut w = self.lock_writer()?;
        {
            let view = self.view.read().unwrap();
            let head = view.head().version;
            let version = layer.produced_from_version();
            if version == 0 || version > head {
                return Err(StoreError::LayerVersion { version, head });
            }
            if let Some(stored) = view.layers.get(layer.name()) {
                if stored.produced_from_version() > version {
                    return Err(StoreError::StaleLayer {
                        name: layer.name().into(),
                        stored: stored.produced_from_version(),
                        offered: version,
                    });
                }
            }
        }
        let l = Arc::new(layer.clone());
        Ok(self.publish(&mut w, EventBody::Layer(layer), move |v| {
            v.layers.insert(l.name().into(), l);
        }))
    }
}

/// All tables under one data directory.
pub struct Store {
    dir: PathBuf,
    tables: RwLock<BTreeMap<String, Arc<Table>>>,
    create: Mutex<()>,
}

impl Store {
    /// Loads and verifies every table in `dir`, creating the directory if
    /// needed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut names = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let file = entry.file_name();
            if let Some(name) = file.to_str().and_then(|f| f.strip_suffix(".spec")) {
                if is_valid_table_name(name) {
                    names.push(name.to_string());
                }
            }
        }
        names.sort();
        let mut tables = BTreeMap::new();
        for name in names {
            let table = load_table(&dir, &name)?;
            info!(table = %name, head = table.head().version, events = table.max_seq(), "loaded table");
            tables.insert(name, Arc::new(table));
        }
        Ok(Store { dir, tables: RwLock::new(tables), create: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn table(&self, name: &str) -> Result<Arc<Table>, StoreError> {
        self.tables.read().unwrap().get(name).cloned().ok_or_else(|| StoreError::UnknownTable(name.into()))
    }

    pub fn tables(&self) -> Vec<Arc<Table>> {
        self.tables.read().unwrap().values().cloned().collect()
    }

    /// Registers a table and commits its empty grid as version 1.
    pub fn create_table(&self, spec: TableSpec, author: &str, source: Source) -> Result<Arc<Table>, StoreError> {
        let _guard = self.create.lock().unwrap();
        let name = spec.name().to_string();
        let sp = spec_path(&self.dir, &name);
        if self.tables.read().unwrap().contains_key(&name) || sp.exists() {
            return Err(StoreError::TableExists(name));
        }
        let genesis =
            Commit::genesis(new_grid(&spec), author, source, now_ms()).map_err(|_| StoreError::AuthorTooLong)?;
        write_new_table(&self.dir, &spec, &genesis.encode())?;
        let table = Arc::new(load_table(&self.dir, &name)?);
        self.tables.write().unwrap().insert(name, table.clone());
        Ok(table)
    }
}

/// Writes the spec and commit log of a table that does not exist yet.
/// `log` holds complete commit lines, newline terminated or not.
pub fn write_new_table(dir: &Path, spec: &TableSpec, log: &[u8]) -> Result<(), StoreError> {
    let name = spec.name();
    let lp = log_path(dir, name);
    let mut f = OpenOptions::new().write(true).create_new(true).open(&lp).map_err(io_err(&lp))?;
    f.write_all(log).map_err(io_err(&lp))?;
    if !log.is_empty() && !log.ends_with(b"\n") {
        f.write_all(b"\n").map_err(io_err(&lp))?;
    }
    f.sync_data().map_err(io_err(&lp))?;
    for p in [comments_path(dir, name), events_path(dir, name)] {
        File::create(&p).and_then(|f| f.sync_data()).map_err(io_err(&p))?;
    }
    // the spec goes last: a table without one is invisible to `open`
    let sp = spec_path(dir, name);
    let tmp = dir.join(format!("{name}.spec.tmp"));
    let mut line = to_canonical(spec);
    line.push(b'\n');
    fs::write(&tmp, &line).map_err(io_err(&tmp))?;
    File::open(&tmp).and_then(|f| f.sync_all()).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &sp).map_err(io_err(&sp))?;
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

pub fn read_spec(dir: &Path, name: &str) -> Result<TableSpec, StoreError> {
    let sp = spec_path(dir, name);
    let bytes = fs::read(&sp).map_err(io_err(&sp))?;
    let line = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    from_canonical::<TableSpec>(line).map_err(|e| StoreError::Corrupt { path: sp, record: 1, detail: e.to_string() })
}

fn corrupt(path: &Path, e: ChainError) -> StoreError {
    StoreError::Corrupt { path: path.to_path_buf(), record: e.record, detail: e.reason.to_string() }
}

fn load_table(dir: &Path, name: &str) -> Result<Table, StoreError> {
    let spec = read_spec(dir, name)?;
    if spec.name() != name {
        return Err(StoreError::Corrupt {
            path: spec_path(dir, name),
            record: 1,
            detail: format!("spec names table {:?}", spec.name()),
        });
    }

    let lp = log_path(dir, name);
    let bytes = read_or_empty(&lp)?;
    let replayed =
        replay(&bytes, Some(&spec)).map_err(|source| StoreError::ChainBroken { table: name.into(), source })?;
    repair_tail(&lp, bytes.len(), replayed.valid_len, replayed.needs_newline)?;
    let mut commits_log = LogFile::open(lp)?;
    let mut commits: Vec<Arc<Commit>> = replayed.records.into_iter().map(Arc::new).collect();
    if commits.is_empty() {
        let genesis = Commit::genesis(new_grid(&spec), "server", Source::Cli, now_ms()).expect("short author");
        warn!(table = name, "commit log is empty, writing genesis");
        commits_log.append(&genesis.encode())?;
        commits.push(Arc::new(genesis));
    }

    let fp = comments_path(dir, name);
    let bytes = read_or_empty(&fp)?;
    let mut book = FeedbackBook::new();
    let mut like_counts = Vec::new();
    let parsed = parse_log(&bytes, |line| {
        let record: FeedbackRecord = parse_canonical_record(line)?;
        let count = match &record {
            FeedbackRecord::Reaction(r) => Some(book.like_count(r.comment_id) + 1),
            FeedbackRecord::Comment(_) => None,
        };
        if let FeedbackRecord::Reaction(r) = &record {
            if book.prepare_reaction(r.comment_id, &r.author).map_err(|e| BreakReason::Invalid(e.to_string()))?.is_none() {
                return Err(BreakReason::Invalid("duplicate like".into()));
            }
        }
        book.apply(record.clone()).map_err(|e| BreakReason::Invalid(e.to_string()))?;
        like_counts.push(count);
        Ok(record)
    })
    .map_err(|e| corrupt(&fp, e))?;
    repair_tail(&fp, bytes.len(), parsed.valid_len, parsed.needs_newline)?;
    let feedback_records = parsed.records;

    let ep = events_path(dir, name);
    let bytes = read_or_empty(&ep)?;
    let mut expected_seq = 1;
    let parsed = parse_log(&bytes, |line| {
        let event: Event = parse_canonical_record(line)?;
        if event.seq != expected_seq {
            return Err(BreakReason::Invalid(format!("expected seq {expected_seq}, found {}", event.seq)));
        }
        expected_seq += 1;
        Ok(event)
    })
    .map_err(|e| corrupt(&ep, e))?;
    repair_tail(&ep, bytes.len(), parsed.valid_len, parsed.needs_newline)?;

    let mut view = View { book, ..View::default() };
    let (mut commit_events, mut feedback_events) = (0usize, 0usize);
    for event in &parsed.records {
        let mismatch = |what: &str| StoreError::Corrupt {
            path: ep.clone(),
            record: event.seq as usize,
            detail: format!("{what} does not match its primary log"),
        };
        match &event.body {
            EventBody::Commit(ce) => {
                if commits.get(commit_events).map(|c| c.commit_hash) != Some(ce.commit.commit_hash) {
                    return Err(mismatch("commit event"));
                }
                commit_events += 1;
            }
            EventBody::Comment(c) => {
                match feedback_records.get(feedback_events) {
                    Some(FeedbackRecord::Comment(r)) if r.id == c.id => {}
                    _ => return Err(mismatch("comment event")),
                }
                feedback_events += 1;
            }
            EventBody::Reaction(re) => {
                match feedback_records.get(feedback_events) {
                    Some(FeedbackRecord::Reaction(r)) if r.comment_id == re.comment_id && r.author == re.author => {}
                    _ => return Err(mismatch("reaction event")),
                }
                feedback_events += 1;
            }
            EventBody::Layer(l) => {
                view.layers.insert(l.name().into(), Arc::new(l.clone()));
            }
        }
        view.events.push(StoredEvent::new(event));
    }

    let mut events_log = LogFile::open(ep)?;
    let mut missing = Vec::new();
    for i in commit_events..commits.len() {
        let diff = match i {
            0 => new_grid(&spec).diff(&commits[0].grid),
            _ => commits[i - 1].grid.diff(&commits[i].grid),
        }
        .expect("grids in one chain share a length");
        missing.push(EventBody::Commit(CommitEvent { commit: (*commits[i]).clone(), diff }));
    }
    for (record, count) in feedback_records.iter().zip(&like_counts).skip(feedback_events) {
        missing.push(match (record, count) {
            (FeedbackRecord::Comment(c), _) => EventBody::Comment(c.clone()),
            (FeedbackRecord::Reaction(r), Some(n)) => EventBody::Reaction(ReactionEvent {
                comment_id: r.comment_id,
                author: r.author.clone(),
                like_count: *n,
            }),
            (FeedbackRecord::Reaction(_), None) => unreachable!("reactions carry a count"),
        });
    }
    if !missing.is_empty() {
        warn!(table = name, count = missing.len(), "rebuilding missing events");
    }
    for body in missing {
        let event = Event { seq: view.next_seq(), body };
        let stored = StoredEvent::new(&event);
        events_log.append(stored.line.as_bytes())?;
        view.events.push(stored);
    }
    view.commits = commits;

    let (live, _) = broadcast::channel(SUBSCRIBER_BUFFER);
    Ok(Table {
        spec,
        writer: Mutex::new(Writer {
            commits: commits_log,
            feedback: LogFile::open(fp)?,
            events: events_log,
            failed: false,
        }),
        view: RwLock::new(view),
        live,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cityio_core::{Cell, TableSpecDraft};

    fn spec(name: &str) -> TableSpec {
        TableSpecDraft::new(name, 4, 3).validate().unwrap()
    }

    fn paint(t: &Table, i: u32, ty: u16) -> CommitOutcome {
        let head = t.head().version;
        t.commit_grid(GridChange::Edits(vec![CellEdit::new(i, Cell::of_type(ty))]), Some(head), "a", Source::Ui)
            .unwrap()
    }

    #[test]
    fn genesis_then_idempotent_commit() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let t = store.create_table(spec("t"), "server", Source::Cli).unwrap();
        assert_eq!(t.head().version, 1);
        assert!(t.head().parent_hash.is_zero());
        let g = t.head().grid.clone();
        match t.commit_grid(GridChange::Full(g), None, "scanner", Source::Table).unwrap() {
            CommitOutcome::Unchanged(c) => assert_eq!(c.version, 1),
            other => panic!("{other:?}"),
        }
        assert_eq!(fs::read(log_path(dir.path(), "t")).unwrap().iter().filter(|b| **b == b'\n').count(), 1);
        assert!(matches!(store.create_table(spec("t"), "s", Source::Cli), Err(StoreError::TableExists(_))));
    }

    #[test]
    fn stale_base_conflicts_and_edits_need_base() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let t = store.create_table(spec("t"), "server", Source::Cli).unwrap();
        assert!(matches!(paint(&t, 0, 3), CommitOutcome::Created(_)));
        let stale = t.commit_grid(GridChange::Edits(vec![]), Some(1), "a", Source::Ui).unwrap();
        assert!(matches!(stale, CommitOutcome::Conflict(h) if h.version == 2));
        assert!(matches!(t.commit_grid(GridChange::Edits(vec![]), None, "a", Source::Ui), Err(StoreError::EditsNeedBase)));
    }

    #[test]
    fn reload_restores_everything() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            let t = store.create_table(spec("t"), "server", Source::Cli).unwrap();
            paint(&t, 1, 4);
            let c = t.add_comment(Anchor::Cell { col: 0, row: 0 }, "nice", "bo").unwrap();
            assert_eq!(t.react(c.id, "al").unwrap(), 1);
            assert_eq!(t.react(c.id, "al").unwrap(), 1);
            let layer = cityio_core::analysis::building_heights(&t.head().grid, t.spec(), 2, "w");
            t.put_layer(layer).unwrap();
        }
        let store = Store::open(dir.path()).unwrap();
        let t = store.table("t").unwrap();
        assert_eq!(t.head().version, 2);
        assert_eq!(t.max_seq(), 5);
        assert_eq!(t.top_comments(1)[0].like_count, 1);
        assert_eq!(t.layer("heights").unwrap().produced_from_version(), 2);
        assert_eq!(t.comment_count(), 1);
    }

    #[test]
    fn missing_events_are_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let before: Vec<Arc<StoredEvent>> = {
            let store = Store::open(dir.path()).unwrap();
            let t = store.create_table(spec("t"), "server", Source::Cli).unwrap();
            paint(&t, 1, 4);
            paint(&t, 2, 3);
            let c = t.add_comment(Anchor::Cell { col: 0, row: 0 }, "x", "bo").unwrap();
            t.react(c.id, "al").unwrap();
            t.subscribe(Some(0)).unwrap().backlog
        };
        // lose the last two events, as if the process died between writes
        let ep = events_path(dir.path(), "t");
        let bytes = fs::read(&ep).unwrap();
        let keep: Vec<&[u8]> = bytes.split_inclusive(|b| *b == b'\n').take(3).collect();
        fs::write(&ep, keep.concat()).unwrap();
        let store = Store::open(dir.path()).unwrap();
        let after = store.table("t").unwrap().subscribe(Some(0)).unwrap().backlog;
        let lines = |v: &[Arc<StoredEvent>]| v.iter().map(|e| e.line.to_string()).collect::<Vec<_>>();
        assert_eq!(lines(&after), lines(&before));
    }

    #[test]
    fn torn_tail_is_cut_on_load() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            let t = store.create_table(spec("t"), "server", Source::Cli).unwrap();
            paint(&t, 1, 4);
        }
        let lp = log_path(dir.path(), "t");
        let mut bytes = fs::read(&lp).unwrap();
        bytes.extend_from_slice(br#"{"version":3,"parent_"#);
        fs::write(&lp, &bytes).unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.table("t").unwrap().head().version, 2);
        assert!(fs::read(&lp).unwrap().ends_with(b"}\n"));
    }

    #[test]
    fn broken_chain_blocks_open() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            let t = store.create_table(spec("t"), "server", Source::Cli).unwrap();
            for i in 0..4 {
                paint(&t, i, 4);
            }
        }
        let lp = log_path(dir.path(), "t");
        let mut bytes = fs::read(&lp).unwrap();
        let third = bytes.split_inclusive(|b| *b == b'\n').take(2).map(|l| l.len()).sum::<usize>();
        bytes[third + 40] ^= 0x04;
        fs::write(&lp, &bytes).unwrap();
        match Store::open(dir.path()) {
            Err(StoreError::ChainBroken { table, source }) => {
                assert_eq!(table, "t");
                assert_eq!(source.record, 3);
            }
            Err(e) => panic!("{e}"),
            Ok(_) => panic!("corruption went unnoticed"),
        }
    }

    #[test]
    fn layers_respect_versions() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let t = store.create_table(spec("t"), "server", Source::Cli).unwrap();
        for i in 0..4 {
            paint(&t, i, 4);
        }
        let h = |v| cityio_core::analysis::building_heights(&t.head().grid, t.spec(), v, "w");
        t.put_layer(h(5)).unwrap();
        assert!(matches!(t.put_layer(h(3)), Err(StoreError::StaleLayer { stored: 5, offered: 3, .. })));
        t.put_layer(h(5)).unwrap();
        assert!(matches!(t.put_layer(h(6)), Err(StoreError::LayerVersion { .. })));
        let wrong = Layer::new("heights", cityio_core::LayerValues::Scalar(vec![0.0; 5]), 5, "w").unwrap();
        assert!(matches!(t.put_layer(wrong), Err(StoreError::InvalidLayer(_))));
    }

    #[test]
    fn concurrent_committers_serialize() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let t = store.create_table(TableSpecDraft::new("t", 8, 8).validate().unwrap(), "s", Source::Cli).unwrap();
        let accepted: usize = std::thread::scope(|s| {
            let handles: Vec<_> = (0..8u32)
                .map(|k| {
                    let t = &t;
                    s.spawn(move || {
                        let mut n = 0;
                        for j in 0..50u32 {
                            // half the frames repeat the previous one from this thread
                            let ty = 1 + ((k + j / 2) % 5) as u16;
                            let cells = (0..64).map(|i| Cell::of_type(if i == k * 8 { ty } else { 0 })).collect();
                            let g = GridState::from_cells(t.spec(), cells).unwrap();
                            if let CommitOutcome::Created(_) =
                                t.commit_grid(GridChange::Full(g), None, "scanner", Source::Table).unwrap()
                            {
                                n += 1;
                            }
                        }
                        n
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).sum()
        });
        assert_eq!(t.head().version, 1 + accepted as u64);
        let log = fs::read(log_path(dir.path(), "t")).unwrap();
        assert_eq!(cityio_core::history::verify_chain(&log, Some(t.spec())).unwrap().records, 1 + accepted);
    }
}
