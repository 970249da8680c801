//! Data model, bundled taxonomy / policy matrix, and ingestion of the
//! line-delimited JSON comment, policy and app files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const TAXONOMY_DATA: &str = include_str!("../data/taxonomy.tsv");
const POLICY_MATRIX_DATA: &str = include_str!("../data/policy_matrix.tsv");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },
    #[error("unknown behavior `{0}`")]
    UnknownBehavior(String),
    #[error("duplicate policy document for ({behavior}, {lang})")]
    DuplicatePolicy { behavior: String, lang: String },
}

/// Top-level behavior category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    FunctionalityPerformance,
    Advertisement,
    Security,
    IllegitimateDeveloperBehavior,
    Content,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::FunctionalityPerformance,
        Category::Advertisement,
        Category::Security,
        Category::IllegitimateDeveloperBehavior,
        Category::Content,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::FunctionalityPerformance => "FunctionalityPerformance",
            Category::Advertisement => "Advertisement",
            Category::Security => "Security",
            Category::IllegitimateDeveloperBehavior => "IllegitimateDeveloperBehavior",
            Category::Content => "Content",
        }
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// Stable key of an undesired behavior, e.g. `fail_to_install`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BehaviorId(String);

impl BehaviorId {
    pub fn new(id: impl Into<String>) -> Self {
        BehaviorId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BehaviorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BehaviorId {
    fn from(s: &str) -> Self {
        BehaviorId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Behavior {
    pub id: BehaviorId,
    pub display_name: String,
    pub category: Category,
}

/// The 26 undesired behaviors, in table order.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    behaviors: Vec<Behavior>,
    index: HashMap<BehaviorId, usize>,
}

impl Taxonomy {
    pub fn behaviors(&self) -> &[Behavior] {
        &self.behaviors
    }

    pub fn get(&self, id: &BehaviorId) -> Option<&Behavior> {
        self.index.get(id).map(|&i| &self.behaviors[i])
    }

    pub fn contains(&self, id: &BehaviorId) -> bool {
        self.index.contains_key(id)
    }

    pub fn category_of(&self, id: &BehaviorId) -> Option<Category> {
        self.get(id).map(|b| b.category)
    }

    /// Position of the behavior in table order; used as a stable sort key.
    pub fn position(&self, id: &BehaviorId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn in_category(&self, category: Category) -> Vec<&Behavior> {
        self.behaviors
            .iter()
            .filter(|b| b.category == category)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.behaviors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behaviors.is_empty()
    }
}

fn data_lines(data: &str) -> impl Iterator<Item = &str> {
    data.lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn parse_taxonomy(data: &str) -> Taxonomy {
    let mut behaviors = Vec::new();
    for line in data_lines(data) {
        let mut cols = line.split('\t');
        let (Some(id), Some(cat), Some(name)) = (cols.next(), cols.next(), cols.next()) else {
            panic!("malformed taxonomy row: {line}");
        };
        behaviors.push(Behavior {
            id: BehaviorId::new(id),
            display_name: name.to_string(),
            category: cat.parse().expect("bundled taxonomy category"),
        });
    }
    let index = behaviors
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.clone(), i))
        .collect();
    Taxonomy { behaviors, index }
}

/// The bundled taxonomy. Parsed once; every call returns the same value.
pub fn load_taxonomy() -> &'static Taxonomy {
    static TAXONOMY: OnceLock<Taxonomy> = OnceLock::new();
    TAXONOMY.get_or_init(|| parse_taxonomy(TAXONOMY_DATA))
}

/// Canonical market key: lowercase alphanumerics with a trailing "market"
/// dropped, so "Oppo Market", "oppo" and "OPPO" all map to `oppo`.
pub fn normalize_market(name: &str) -> String {
    let key: String = name
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    match key.strip_suffix("market") {
        Some(stripped) if !stripped.is_empty() => stripped.to_string(),
        _ => key,
    }
}

/// Which behaviors each market's published policies declare.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyMatrix {
    markets: Vec<String>,
    declared: BTreeMap<(String, BehaviorId), bool>,
}

impl PolicyMatrix {
    /// Market keys in table order.
    pub fn markets(&self) -> &[String] {
        &self.markets
    }

    pub fn knows_market(&self, market: &str) -> bool {
        let key = normalize_market(market);
        self.markets.contains(&key)
    }

    /// `None` when the market is not covered by the matrix.
    pub fn is_declared(&self, market: &str, behavior: &BehaviorId) -> Option<bool> {
        self.declared
            .get(&(normalize_market(market), behavior.clone()))
            .copied()
    }

    pub fn declared_count(&self, market: &str) -> usize {
        let key = normalize_market(market);
        self.declared
            .iter()
            .filter(|((m, _), &d)| *m == key && d)
            .count()
    }
}

fn parse_policy_matrix(data: &str, taxonomy: &Taxonomy) -> PolicyMatrix {
    let mut lines = data_lines(data);
    let header = lines.next().expect("policy matrix header");
    let markets: Vec<String> = header.split('\t').skip(1).map(normalize_market).collect();
    let mut declared = BTreeMap::new();
    for line in lines {
        let mut cols = line.split('\t');
        let behavior = BehaviorId::new(cols.next().expect("behavior column"));
        assert!(
            taxonomy.contains(&behavior),
            "policy matrix row for unknown behavior {behavior}"
        );
        for (market, cell) in markets.iter().zip(cols) {
            declared.insert((market.clone(), behavior.clone()), cell == "1");
        }
    }
    PolicyMatrix { markets, declared }
}

/// The bundled per-market declaration matrix.
pub fn load_policy_matrix() -> &'static PolicyMatrix {
    static MATRIX: OnceLock<PolicyMatrix> = OnceLock::new();
    MATRIX.get_or_init(|| parse_policy_matrix(POLICY_MATRIX_DATA, load_taxonomy()))
}

/// One user review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub app_id: String,
    pub market: String,
    pub lang: String,
    pub rating: u8,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posted_at: Option<NaiveDate>,
}

impl Comment {
    pub fn is_blank(&self) -> bool {
        self.text.trim().is_empty()
    }
}

/// Id used when a record has none: a short content hash.
pub fn synthesize_comment_id(
    app_id: &str,
    market: &str,
    posted_at: Option<NaiveDate>,
    text: &str,
) -> String {
    let mut hasher = Sha256::new();
    for part in [
        app_id,
        market,
        &posted_at.map(|d| d.to_string()).unwrap_or_default(),
        text,
    ] {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    format!("c-{}", &hex::encode(hasher.finalize())[..16])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Result of loading a line-delimited file: the valid records plus one
/// error per rejected line.
#[derive(Debug, Clone)]
pub struct Ingested<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
}

#[derive(Deserialize)]
struct RawComment {
    #[serde(default)]
    id: Option<String>,
    app_id: String,
    market: String,
    lang: String,
    rating: i64,
    #[serde(default)]
    text: String,
    #[serde(default)]
    posted_at: Option<String>,
}

fn parse_date(raw: Option<String>) -> Result<Option<NaiveDate>, String> {
    match raw {
        None => Ok(None),
        Some(s) if s.trim().is_empty() => Ok(None),
        Some(s) => NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(Some)
            .map_err(|_| format!("invalid date `{s}` (expected YYYY-MM-DD)")),
    }
}

fn parse_comment_line(line: &str) -> Result<Comment, String> {
    let raw: RawComment = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    if !(1..=5).contains(&raw.rating) {
        return Err(format!("rating out of range: {}", raw.rating));
    }
    if raw.lang.trim().is_empty() {
        return Err("empty language tag".to_string());
    }
    let posted_at = parse_date(raw.posted_at)?;
    let id = match raw.id {
        Some(id) if !id.is_empty() => id,
        _ => synthesize_comment_id(&raw.app_id, &raw.market, posted_at, &raw.text),
    };
    Ok(Comment {
        id,
        app_id: raw.app_id,
        market: raw.market,
        lang: raw.lang,
        rating: raw.rating as u8,
        text: raw.text,
        posted_at,
    })
}

fn read_file(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_lines<T>(
    content: &str,
    mut parse: impl FnMut(&str) -> Result<T, String>,
) -> Ingested<T> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse(line) {
            Ok(r) => records.push(r),
            Err(message) => errors.push(LineError {
                line: idx + 1,
                message,
            }),
        }
    }
    Ingested { records, errors }
}

pub fn parse_comments(content: &str) -> Ingested<Comment> {
    parse_lines(content, parse_comment_line)
}

/// Loads a comments file. Bad lines are reported, good lines still load.
pub fn ingest_comments(path: impl AsRef<Path>) -> Result<Ingested<Comment>, CorpusError> {
    Ok(parse_comments(&read_file(path.as_ref())?))
}

/// One JSON object per line, fields in declaration order.
pub fn serialize_comments(comments: &[Comment]) -> String {
    to_json_lines(comments)
}

pub fn to_json_lines<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Policy prose for one behavior in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub behavior: BehaviorId,
    pub lang: String,
    pub text: String,
}

/// Parses a policies file, checking behaviors against the taxonomy and
/// rejecting duplicate (behavior, lang) pairs. Policy files are small and
/// curated, so any bad record fails the load.
pub fn parse_policies(content: &str, path: &str) -> Result<Vec<PolicyDocument>, CorpusError> {
    let taxonomy = load_taxonomy();
    let mut seen = BTreeSet::new();
    let mut docs = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record_err = |message: String| CorpusError::Record {
            path: path.to_string(),
            line: idx + 1,
            message,
        };
        let doc: PolicyDocument =
            serde_json::from_str(line).map_err(|e| record_err(format!("malformed record: {e}")))?;
        if !taxonomy.contains(&doc.behavior) {
            return Err(CorpusError::UnknownBehavior(doc.behavior.to_string()));
        }
        if doc.text.trim().is_empty() {
            return Err(record_err(format!("empty policy text for {}", doc.behavior)));
        }
        if !seen.insert((doc.behavior.clone(), doc.lang.clone())) {
            return Err(CorpusError::DuplicatePolicy {
                behavior: doc.behavior.to_string(),
                lang: doc.lang,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_policies(path: impl AsRef<Path>) -> Result<Vec<PolicyDocument>, CorpusError> {
    let path = path.as_ref();
    parse_policies(&read_file(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRecord {
    pub app_id: String,
    pub market: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_at: Option<NaiveDate>,
}

#[derive(Deserialize)]
struct RawApp {
    app_id: String,
    market: String,
    #[serde(default)]
    removed_at: Option<String>,
}

pub fn parse_apps(content: &str) -> Ingested<AppRecord> {
    parse_lines(content, |line| {
        let raw: RawApp =
            serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
        Ok(AppRecord {
            app_id: raw.app_id,
            market: raw.market,
            removed_at: parse_date(raw.removed_at)?,
        })
    })
}

pub fn load_apps(path: impl AsRef<Path>) -> Result<Ingested<AppRecord>, CorpusError> {
    Ok(parse_apps(&read_file(path.as_ref())?))
}

/// Drops removal dates that precede the app's earliest comment and
/// returns a warning for each. Such records violate the app invariant.
pub fn check_removal_dates(apps: &mut [AppRecord], comments: &[Comment]) -> Vec<String> {
    let mut earliest: HashMap<(&str, String), NaiveDate> = HashMap::new();
    for c in comments {
        if let Some(d) = c.posted_at {
            let e = earliest
                .entry((c.app_id.as_str(), normalize_market(&c.market)))
                .or_insert(d);
            *e = (*e).min(d);
        }
    }
    let mut warnings = Vec::new();
    for app in apps.iter_mut() {
        if let (Some(removed), Some(first)) = (
            app.removed_at,
            earliest.get(&(app.app_id.as_str(), normalize_market(&app.market))),
        ) {
            if removed < *first {
                warnings.push(format!(
                    "app {} ({}) removed {} before its first comment {}; removal date ignored",
                    app.app_id, app.market, removed, first
                ));
                app.removed_at = None;
            }
        }
    }
    warnings
}
