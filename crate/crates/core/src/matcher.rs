//! Rule evaluation over comment streams.
//!
//! Distance is the number of tokens strictly between the two keywords,
//! counted on the pipeline's matching stream (stopwords removed by
//! default). A pair rule `{u, v, d}` matches when `u` occurs before `v`
//! with fewer than `d` tokens in between.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{load_taxonomy, BehaviorId, Comment};
use crate::textprep::TextPipeline;

pub const MAX_DISTANCE: u32 = 20;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("no rules for language `{0}`")]
    UnsupportedLanguage(String),
    #[error("rules line {line}: {message}")]
    RuleFormat { line: usize, message: String },
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// `{first, second, max_distance}`; a single-keyword rule has neither
/// `second` nor `max_distance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticRule {
    pub behavior: BehaviorId,
    pub lang: String,
    pub first: String,
    pub second: Option<String>,
    pub max_distance: Option<u32>,
    pub train_f1: Option<f64>,
}

impl SemanticRule {
    pub fn single(behavior: &str, lang: &str, keyword: &str) -> Self {
        SemanticRule {
            behavior: behavior.into(),
            lang: lang.into(),
            first: keyword.into(),
            second: None,
            max_distance: None,
            train_f1: None,
        }
    }

    pub fn pair(behavior: &str, lang: &str, first: &str, second: &str, max_distance: u32) -> Self {
        SemanticRule {
            behavior: behavior.into(),
            lang: lang.into(),
            first: first.into(),
            second: Some(second.into()),
            max_distance: Some(max_distance),
            train_f1: None,
        }
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        let bad = |m: String| Err(MatchError::InvalidRule(format!("{self}: {m}")));
        if !load_taxonomy().contains(&self.behavior) {
            return bad(format!("unknown behavior `{}`", self.behavior));
        }
        if self.lang.is_empty() {
            return bad("empty language tag".into());
        }
        for kw in std::iter::once(&self.first).chain(self.second.as_ref()) {
            if kw.is_empty() || kw.chars().any(|c| c.is_whitespace() || c.is_uppercase()) {
                return bad(format!("keyword `{kw}` must be one lowercase token"));
            }
        }
        match (&self.second, self.max_distance) {
            (None, None) => Ok(()),
            (Some(_), Some(d)) if (1..=MAX_DISTANCE).contains(&d) => Ok(()),
            (Some(_), Some(d)) => bad(format!("max_distance {d} outside 1..={MAX_DISTANCE}")),
            _ => bad("second keyword and max_distance must be given together".into()),
        }
    }
}

impl fmt::Display for SemanticRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.second, self.max_distance) {
            (Some(s), Some(d)) => write!(f, "{{{}, {}, {}}}", self.first, s, d),
            _ => write!(f, "{{{}, null, null}}", self.first),
        }
    }
}

/// Earliest `(i, j)` with `tokens[i] == first`, `tokens[j] == second`,
/// `i < j` and `j - i - 1 < max_distance`. `j` is `None` for single rules.
pub fn match_rule(rule: &SemanticRule, tokens: &[String]) -> Option<(usize, Option<usize>)> {
    match (&rule.second, rule.max_distance) {
        (Some(second), Some(d)) => match_pair(&rule.first, second, d, tokens).map(|(i, j)| (i, Some(j))),
        _ => tokens.iter().position(|t| *t == rule.first).map(|i| (i, None)),
    }
}

pub fn match_pair(first: &str, second: &str, max_distance: u32, tokens: &[String]) -> Option<(usize, usize)> {
    let d = max_distance as usize;
    for (i, t) in tokens.iter().enumerate() {
        if t != first {
            continue;
        }
        let end = (i + d).min(tokens.len().saturating_sub(1));
        if let Some(j) = (i + 1..=end).find(|&j| tokens[j] == second) {
            return Some((i, j));
        }
    }
    None
}

/// Smallest gap over all ordered occurrences of `first` before `second`.
/// The pair matches at distance `d` iff this is `Some(g)` with `g < d`.
pub fn min_gap(first: &str, second: &str, tokens: &[String]) -> Option<usize> {
    let mut last_first = None;
    let mut best: Option<usize> = None;
    for (j, t) in tokens.iter().enumerate() {
        // `second` is checked first so that first == second needs two occurrences
        if t == second {
            if let Some(i) = last_first {
                let gap = j - i - 1;
                best = Some(best.map_or(gap, |b: usize| b.min(gap)));
            }
        }
        if t == first {
            last_first = Some(j);
        }
    }
    best
}

pub fn parse_rules(text: &str) -> Result<Vec<SemanticRule>, MatchError> {
    let mut rules = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rule: SemanticRule = serde_json::from_str(line).map_err(|e| MatchError::RuleFormat {
            line: n + 1,
            message: e.to_string(),
        })?;
        rule.validate().map_err(|e| MatchError::RuleFormat {
            line: n + 1,
            message: e.to_string(),
        })?;
        rules.push(rule);
    }
    Ok(rules)
}

pub fn load_rules(path: impl AsRef<Path>) -> Result<Vec<SemanticRule>, MatchError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MatchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_rules(&text)
}

pub fn serialize_rules(rules: &[SemanticRule]) -> String {
    crate::corpus::to_json_lines(rules)
}

/// The rules that ship with the crate.
pub fn bundled_rules() -> Vec<SemanticRule> {
    parse_rules(include_str!("../data/rules/bundled.jsonl")).expect("bundled rules are valid")
}

/// Validated rules indexed by language and behavior.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<SemanticRule>,
    index: BTreeMap<String, BTreeMap<BehaviorId, Vec<usize>>>,
    version: String,
}

impl RuleSet {
    pub fn new(rules: Vec<SemanticRule>) -> Result<Self, MatchError> {
        let mut index: BTreeMap<String, BTreeMap<BehaviorId, Vec<usize>>> = BTreeMap::new();
        for (i, r) in rules.iter().enumerate() {
            r.validate()?;
            index
                .entry(r.lang.clone())
                .or_default()
                .entry(r.behavior.clone())
                .or_default()
                .push(i);
        }
        let version = hex::encode(Sha256::digest(serialize_rules(&rules).as_bytes()));
        Ok(RuleSet { rules, index, version })
    }

    pub fn rules(&self) -> &[SemanticRule] {
        &self.rules
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn has_language(&self, lang: &str) -> bool {
        self.index.contains_key(lang)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleHit {
    /// Index into [`RuleSet::rules`].
    pub rule: usize,
    pub positions: (usize, Option<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub comment_id: String,
    pub behavior: BehaviorId,
    pub matched_rules: Vec<RuleHit>,
}

/// Matches of one comment's token stream against every rule of `lang`.
pub fn classify_tokens(comment_id: &str, tokens: &[String], lang: &str, ruleset: &RuleSet) -> Result<Vec<MatchResult>, MatchError> {
    let by_behavior = ruleset
        .index
        .get(lang)
        .ok_or_else(|| MatchError::UnsupportedLanguage(lang.to_string()))?;
    let mut out = Vec::new();
    for (behavior, idxs) in by_behavior {
        let hits: Vec<RuleHit> = idxs
            .iter()
            .filter_map(|&i| {
                match_rule(&ruleset.rules[i], tokens).map(|positions| RuleHit { rule: i, positions })
            })
            .collect();
        if !hits.is_empty() {
            out.push(MatchResult {
                comment_id: comment_id.to_string(),
                behavior: behavior.clone(),
                matched_rules: hits,
            });
        }
    }
    Ok(out)
}

pub fn classify(comment: &Comment, ruleset: &RuleSet, pipeline: &TextPipeline) -> Result<Vec<MatchResult>, MatchError> {
    if !ruleset.has_language(&comment.lang) || !pipeline.supports(&comment.lang) {
        return Err(MatchError::UnsupportedLanguage(comment.lang.clone()));
    }
    let tokens = pipeline
        .match_tokens(&comment.text, &comment.lang)
        .map_err(|_| MatchError::UnsupportedLanguage(comment.lang.clone()))?;
    classify_tokens(&comment.id, &tokens, &comment.lang, ruleset)
}

/// One line of the matches file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub comment_id: String,
    pub app_id: String,
    pub market: String,
    pub behavior: BehaviorId,
    pub rule_refs: Vec<String>,
    pub rating: u8,
    pub posted_at: Option<NaiveDate>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub comments: usize,
    pub matched_comments: usize,
    pub unsupported: usize,
    pub per_behavior: BTreeMap<BehaviorId, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommentFailure {
    pub comment_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct StreamOutput {
    pub records: Vec<MatchRecord>,
    pub failures: Vec<CommentFailure>,
    pub summary: StreamSummary,
}

/// Classifies every comment in parallel; output follows input order.
pub fn classify_stream(comments: &[Comment], ruleset: &RuleSet, pipeline: &TextPipeline) -> StreamOutput {
    let per_comment: Vec<Result<Vec<MatchResult>, MatchError>> =
        comments.par_iter().map(|c| classify(c, ruleset, pipeline)).collect();
    let mut out = StreamOutput::default();
    out.summary.comments = comments.len();
    for (comment, result) in comments.iter().zip(per_comment) {
        match result {
            Ok(results) => {
                if !results.is_empty() {
                    out.summary.matched_comments += 1;
                }
                for r in results {
                    *out.summary.per_behavior.entry(r.behavior.clone()).or_default() += 1;
                    out.records.push(MatchRecord {
                        comment_id: comment.id.clone(),
                        app_id: comment.app_id.clone(),
                        market: comment.market.clone(),
                        behavior: r.behavior,
                        rule_refs: r
                            .matched_rules
                            .iter()
                            .map(|h| ruleset.rules[h.rule].to_string())
                            .collect(),
                        rating: comment.rating,
                        posted_at: comment.posted_at,
                    });
                }
            }
            Err(e) => {
                if matches!(e, MatchError::UnsupportedLanguage(_)) {
                    out.summary.unsupported += 1;
                }
                out.failures.push(CommentFailure {
                    comment_id: comment.id.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    out
}

pub fn parse_matches(text: &str) -> Result<Vec<MatchRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", n + 1)))
        .collect()
}

/// Comment ids with at least one match, for quick membership tests.
pub fn matched_ids(records: &[MatchRecord]) -> HashSet<&str> {
    records.iter().map(|r| r.comment_id.as_str()).collect()
}
