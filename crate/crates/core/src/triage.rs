//! Human confirmation of machine-proposed labels.
//!
//! The store is an append-only event log plus an optional snapshot. Every
//! mutation is validated, appended as a [`TriageEvent`], then applied, so
//! replaying the log onto an empty store rebuilds the same state.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_taxonomy, BehaviorId, Comment};
use crate::labeler::CandidateLabel;

const LOG_FILE: &str = "decisions.log";
const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("no triage item {0}")]
    NotFound(u64),
    #[error("item {item_id} is already {status:?}")]
    Conflict { item_id: u64, status: TriageStatus },
    #[error("invalid decision: {0}")]
    Validation(String),
    #[error("comment `{0}` not found")]
    UnresolvedComment(String),
    #[error("{path}: {message}")]
    Log { path: String, message: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TriageError + '_ {
    move |source| TriageError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriageStatus {
    Pending,
    Confirmed,
    Rejected,
    Split,
}

impl TriageStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TriageStatus::Pending => "pending",
            TriageStatus::Confirmed => "confirmed",
            TriageStatus::Rejected => "rejected",
            TriageStatus::Split => "split",
        }
    }
}

impl std::str::FromStr for TriageStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pending" => Ok(TriageStatus::Pending),
            "confirmed" => Ok(TriageStatus::Confirmed),
            "rejected" => Ok(TriageStatus::Rejected),
            "split" => Ok(TriageStatus::Split),
            _ => Err(format!("unknown status `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Confirm,
    Reject,
    Split,
}

impl Verdict {
    fn status(self) -> TriageStatus {
        match self {
            Verdict::Confirm => TriageStatus::Confirmed,
            Verdict::Reject => TriageStatus::Rejected,
            Verdict::Split => TriageStatus::Split,
        }
    }
}

/// One sentence cut out of a multi-behavior comment. `offset` is the byte
/// position of `text` in the parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSegment {
    pub parent_comment_id: String,
    pub ordinal: usize,
    pub offset: usize,
    pub text: String,
    pub behavior: BehaviorId,
}

/// Segment as submitted by a reviewer, in reading order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub text: String,
    pub behavior: BehaviorId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOpinion {
    pub reviewer: String,
    pub verdict: Verdict,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageItem {
    pub item_id: u64,
    pub candidate: CandidateLabel,
    pub comment_text: String,
    pub lang: String,
    pub status: TriageStatus,
    pub enqueued_at: DateTime<Utc>,
    pub decided_at: Option<DateTime<Utc>>,
    pub reviewer: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SplitSegment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_opinion: Option<SecondOpinion>,
}

impl TriageItem {
    /// True when a second reviewer's verdict differs from the recorded one.
    pub fn has_disagreement(&self) -> bool {
        match (&self.second_opinion, self.status) {
            (Some(_), TriageStatus::Pending) | (None, _) => false,
            (Some(op), status) => op.verdict.status() != status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TriageEvent {
    Enqueued {
        item_id: u64,
        candidate: CandidateLabel,
        comment_text: String,
        lang: String,
        at: DateTime<Utc>,
    },
    Decided {
        item_id: u64,
        verdict: Verdict,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        segments: Vec<SegmentSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reviewer: Option<String>,
        at: DateTime<Utc>,
    },
    SecondOpinion {
        item_id: u64,
        reviewer: String,
        verdict: Verdict,
        at: DateTime<Utc>,
    },
    Reverted {
        item_id: u64,
        at: DateTime<Utc>,
    },
}

/// Source of decision timestamps. `Fixed` makes logs byte-reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    System,
    Fixed(DateTime<Utc>),
}

impl Clock {
    pub fn now(self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EnqueueReport {
    pub added: usize,
    pub duplicates: usize,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub by_status: BTreeMap<TriageStatus, usize>,
    pub by_behavior: BTreeMap<BehaviorId, BTreeMap<TriageStatus, usize>>,
    pub disagreements: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub id: String,
    pub text: String,
}

/// Confirmed comments and split segments, grouped per behavior.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub lang: String,
    pub behaviors: BTreeMap<BehaviorId, Vec<LabeledText>>,
}

impl LabeledCorpus {
    pub fn new(lang: &str) -> Self {
        LabeledCorpus {
            lang: lang.to_string(),
            behaviors: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, behavior: BehaviorId, id: impl Into<String>, text: impl Into<String>) {
        self.behaviors.entry(behavior).or_default().push(LabeledText {
            id: id.into(),
            text: text.into(),
        });
    }

    /// Entries of one behavior; empty for behaviors with no labels.
    pub fn texts(&self, behavior: &BehaviorId) -> &[LabeledText] {
        self.behaviors.get(behavior).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.behaviors.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serializes") + "\n"
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    events_applied: usize,
    items: Vec<TriageItem>,
}

#[derive(Debug, Default)]
pub struct TriageStore {
    items: Vec<TriageItem>,
    by_key: HashMap<(String, BehaviorId), u64>,
    events: Vec<TriageEvent>,
    dir: Option<PathBuf>,
    clock: Clock,
}

/// Finds each segment in order in `parent`. Separators between segments
/// may be anything, so concatenating them back reproduces the parent.
pub fn locate_segments(
    parent_id: &str,
    parent: &str,
    specs: &[SegmentSpec],
) -> Result<Vec<SplitSegment>, TriageError> {
    if specs.len() < 2 {
        return Err(TriageError::Validation(
            "a split needs at least two segments".into(),
        ));
    }
    let taxonomy = load_taxonomy();
    let mut cursor = 0;
    let mut out = Vec::with_capacity(specs.len());
    for (ordinal, spec) in specs.iter().enumerate() {
        if spec.text.trim().is_empty() {
            return Err(TriageError::Validation(format!("segment {ordinal} has no text")));
        }
        if !taxonomy.contains(&spec.behavior) {
            return Err(TriageError::Validation(format!(
                "segment {ordinal}: unknown behavior `{}`",
                spec.behavior
            )));
        }
        let Some(pos) = parent[cursor..].find(&spec.text) else {
            return Err(TriageError::Validation(format!(
                "segment {ordinal} does not occur in the comment after the previous segment"
            )));
        };
        let offset = cursor + pos;
        cursor = offset + spec.text.len();
        out.push(SplitSegment {
            parent_comment_id: parent_id.to_string(),
            ordinal,
            offset,
            text: spec.text.clone(),
            behavior: spec.behavior.clone(),
        });
    }
    Ok(out)
}

/// Rebuilds the parent text from segments and the separators between them.
pub fn reconstruct_parent(parent: &str, segments: &[SplitSegment]) -> String {
    let mut out = String::new();
    let mut cursor = 0;
    for s in segments {
        out.push_str(&parent[cursor..s.offset]);
        out.push_str(&s.text);
        cursor = s.offset + s.text.len();
    }
    out.push_str(&parent[cursor..]);
    out
}

impl TriageStore {
    /// In-memory store with no persistence.
    pub fn in_memory() -> Self {
        TriageStore::default()
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    /// Opens (or creates) a store directory: loads the snapshot if present,
    /// then replays log events recorded after it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, TriageError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut store = TriageStore::default();
        let snap_path = dir.join(SNAPSHOT_FILE);
        let mut skip = 0;
        if snap_path.exists() {
            let text = fs::read_to_string(&snap_path).map_err(io_err(&snap_path))?;
            let snap: Snapshot = serde_json::from_str(&text).map_err(|e| TriageError::Log {
                path: snap_path.display().to_string(),
                message: e.to_string(),
            })?;
            for item in snap.items {
                store
                    .by_key
                    .insert((item.candidate.comment_id.clone(), item.candidate.behavior.clone()), item.item_id);
                store.items.push(item);
            }
            skip = snap.events_applied;
        }
        let log_path = dir.join(LOG_FILE);
        let events = if log_path.exists() {
            read_log(&log_path)?
        } else {
            Vec::new()
        };
        if events.len() < skip {
            return Err(TriageError::Log {
                path: log_path.display().to_string(),
                message: format!("snapshot covers {skip} events but the log has {}", events.len()),
            });
        }
        for (n, event) in events.iter().enumerate() {
            if n >= skip {
                store.apply(event).map_err(|e| TriageError::Log {
                    path: log_path.display().to_string(),
                    message: format!("event {}: {e}", n + 1),
                })?;
            }
        }
        store.events = events;
        store.dir = Some(dir);
        Ok(store)
    }

    /// Applies `events` in order to an empty in-memory store.
    pub fn replay(events: &[TriageEvent]) -> Result<Self, TriageError> {
        let mut store = TriageStore::in_memory();
        for e in events {
            store.record(e.clone())?;
        }
        Ok(store)
    }

    pub fn events(&self) -> &[TriageEvent] {
        &self.events
    }

    pub fn items(&self) -> &[TriageItem] {
        &self.items
    }

    pub fn get(&self, item_id: u64) -> Option<&TriageItem> {
        self.index_of(item_id).map(|i| &self.items[i])
    }

    fn index_of(&self, item_id: u64) -> Option<usize> {
        self.items.binary_search_by_key(&item_id, |it| it.item_id).ok()
    }

    fn apply(&mut self, event: &TriageEvent) -> Result<(), TriageError> {
        match event {
            TriageEvent::Enqueued {
                item_id,
                candidate,
                comment_text,
                lang,
                at,
            } => {
                if self.items.last().is_some_and(|it| it.item_id >= *item_id) {
                    return Err(TriageError::Validation(format!(
                        "item ids must increase, got {item_id}"
                    )));
                }
                let key = (candidate.comment_id.clone(), candidate.behavior.clone());
                if self.by_key.contains_key(&key) {
                    return Err(TriageError::Validation(format!(
                        "duplicate candidate ({}, {})",
                        key.0, key.1
                    )));
                }
                self.by_key.insert(key, *item_id);
                self.items.push(TriageItem {
                    item_id: *item_id,
                    candidate: candidate.clone(),
                    comment_text: comment_text.clone(),
                    lang: lang.clone(),
                    status: TriageStatus::Pending,
                    enqueued_at: *at,
                    decided_at: None,
                    reviewer: None,
                    segments: Vec::new(),
                    second_opinion: None,
                });
            }
            TriageEvent::Decided {
                item_id,
                verdict,
                segments,
                reviewer,
                at,
            } => {
                let idx = self.index_of(*item_id).ok_or(TriageError::NotFound(*item_id))?;
                let item = &self.items[idx];
                if item.status != TriageStatus::Pending {
                    return Err(TriageError::Conflict {
                        item_id: *item_id,
                        status: item.status,
                    });
                }
                let located = match verdict {
                    Verdict::Split => {
                        locate_segments(&item.candidate.comment_id, &item.comment_text, segments)?
                    }
                    _ if !segments.is_empty() => {
                        return Err(TriageError::Validation(
                            "segments are only allowed with a split verdict".into(),
                        ))
                    }
                    _ => Vec::new(),
                };
                let item = &mut self.items[idx];
                item.status = verdict.status();
                item.segments = located;
                item.reviewer = reviewer.clone();
                item.decided_at = Some(*at);
            }
            TriageEvent::SecondOpinion {
                item_id,
                reviewer,
                verdict,
                at,
            } => {
                let idx = self.index_of(*item_id).ok_or(TriageError::NotFound(*item_id))?;
                self.items[idx].second_opinion = Some(SecondOpinion {
                    reviewer: reviewer.clone(),
                    verdict: *verdict,
                    at: *at,
                });
            }
            TriageEvent::Reverted { item_id, .. } => {
                let idx = self.index_of(*item_id).ok_or(TriageError::NotFound(*item_id))?;
                let item = &mut self.items[idx];
                if item.status == TriageStatus::Pending {
                    return Err(TriageError::Validation(format!(
                        "item {item_id} is pending; nothing to revert"
                    )));
                }
                item.status = TriageStatus::Pending;
                item.segments.clear();
                item.reviewer = None;
                item.decided_at = None;
            }
        }
        Ok(())
    }

    /// Validates and applies an event, then appends it to the log.
    pub fn record(&mut self, event: TriageEvent) -> Result<(), TriageError> {
        self.apply(&event)?;
        if let Some(dir) = &self.dir {
            let path = dir.join(LOG_FILE);
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(io_err(&path))?;
            let line = serde_json::to_string(&event).expect("event serializes");
            writeln!(file, "{line}").map_err(io_err(&path))?;
        }
        self.events.push(event);
        Ok(())
    }

    /// Adds pending items for candidates whose comment can be resolved.
    /// Already-known (comment, behavior) pairs are skipped.
    pub fn enqueue(&mut self, candidates: &[CandidateLabel], comments: &[Comment]) -> Result<EnqueueReport, TriageError> {
        let by_id: HashMap<&str, &Comment> = comments.iter().map(|c| (c.id.as_str(), c)).collect();
        let mut report = EnqueueReport::default();
        for cand in candidates {
            if self
                .by_key
                .contains_key(&(cand.comment_id.clone(), cand.behavior.clone()))
            {
                report.duplicates += 1;
                continue;
            }
            let Some(comment) = by_id.get(cand.comment_id.as_str()) else {
                report
                    .errors
                    .push(TriageError::UnresolvedComment(cand.comment_id.clone()).to_string());
                continue;
            };
            let item_id = self.items.last().map_or(1, |it| it.item_id + 1);
            self.record(TriageEvent::Enqueued {
                item_id,
                candidate: cand.clone(),
                comment_text: comment.text.clone(),
                lang: comment.lang.clone(),
                at: self.clock.now(),
            })?;
            report.added += 1;
        }
        Ok(report)
    }

    pub fn decide(
        &mut self,
        item_id: u64,
        verdict: Verdict,
        segments: Vec<SegmentSpec>,
        reviewer: Option<String>,
    ) -> Result<TriageItem, TriageError> {
        self.record(TriageEvent::Decided {
            item_id,
            verdict,
            segments,
            reviewer,
            at: self.clock.now(),
        })?;
        Ok(self.get(item_id).cloned().expect("decided item exists"))
    }

    pub fn second_opinion(&mut self, item_id: u64, reviewer: &str, verdict: Verdict) -> Result<TriageItem, TriageError> {
        self.record(TriageEvent::SecondOpinion {
            item_id,
            reviewer: reviewer.to_string(),
            verdict,
            at: self.clock.now(),
        })?;
        Ok(self.get(item_id).cloned().expect("item exists"))
    }

    pub fn revert(&mut self, item_id: u64) -> Result<TriageItem, TriageError> {
        self.record(TriageEvent::Reverted {
            item_id,
            at: self.clock.now(),
        })?;
        Ok(self.get(item_id).cloned().expect("item exists"))
    }

    /// Items with `status`, oldest first, at most `limit`.
    pub fn list(&self, status: Option<TriageStatus>, limit: Option<usize>) -> Vec<TriageItem> {
        self.items
            .iter()
            .filter(|it| status.is_none_or(|s| it.status == s))
            .take(limit.unwrap_or(usize::MAX))
            .cloned()
            .collect()
    }

    pub fn disagreements(&self) -> Vec<&TriageItem> {
        self.items.iter().filter(|it| it.has_disagreement()).collect()
    }

    pub fn progress(&self) -> Progress {
        let mut p = Progress::default();
        for it in &self.items {
            *p.by_status.entry(it.status).or_default() += 1;
            *p.by_behavior
                .entry(it.candidate.behavior.clone())
                .or_default()
                .entry(it.status)
                .or_default() += 1;
            if it.has_disagreement() {
                p.disagreements += 1;
            }
        }
        p
    }

    pub fn export_labeled_corpus(&self, lang: &str) -> LabeledCorpus {
        let mut corpus = LabeledCorpus::new(lang);
        for it in self.items.iter().filter(|it| it.lang == lang) {
            match it.status {
                TriageStatus::Confirmed => corpus.push(
                    it.candidate.behavior.clone(),
                    it.candidate.comment_id.clone(),
                    it.comment_text.clone(),
                ),
                TriageStatus::Split => {
                    for s in &it.segments {
                        corpus.push(
                            s.behavior.clone(),
                            format!("{}#{}", s.parent_comment_id, s.ordinal),
                            s.text.clone(),
                        );
                    }
                }
                TriageStatus::Pending | TriageStatus::Rejected => {}
            }
        }
        corpus
    }

    /// Writes the snapshot so the next `open` can skip replaying the log.
    pub fn write_snapshot(&self) -> Result<(), TriageError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(SNAPSHOT_FILE);
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let snap = Snapshot {
            events_applied: self.events.len(),
            items: self.items.clone(),
        };
        {
            let file = File::create(&tmp).map_err(io_err(&tmp))?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &snap).map_err(|e| TriageError::Log {
                path: tmp.display().to_string(),
                message: e.to_string(),
            })?;
            w.flush().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }
}

/// Reads a JSON-lines decision log.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<TriageEvent>, TriageError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_log(&text).map_err(|message| TriageError::Log {
        path: path.display().to_string(),
        message,
    })
}

pub fn parse_log(text: &str) -> Result<Vec<TriageEvent>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", n + 1)))
        .collect()
}

pub fn write_log(events: &[TriageEvent]) -> String {
    crate::corpus::to_json_lines(events)
}
