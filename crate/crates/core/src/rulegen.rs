//! Semantic-rule extraction from a labeled corpus.
//!
//! Per behavior: rank words by TF-IDF (counts from that behavior's
//! comments, document frequency over all labeled comments), walk the ranking grouping words whose comment sets overlap until every
//! comment is covered, then pair keywords of different part of speech and
//! pick each ordered pair's distance by F1 against the other behaviors.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_taxonomy, BehaviorId, PolicyDocument};
use crate::matcher::{min_gap, SemanticRule, MAX_DISTANCE};
use crate::textprep::{PosLexicon, PosTag, TextError, TextPipeline};
use crate::triage::LabeledCorpus;

#[derive(Debug, Error)]
pub enum RuleGenError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("no positive examples for `{0}`")]
    NoPositives(String),
    #[error("unknown behavior `{0}` in labeled corpus")]
    UnknownBehavior(BehaviorId),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleGenConfig {
    pub max_distance: u32,
    pub min_f1: f64,
    pub fallback_keywords: usize,
}

impl Default for RuleGenConfig {
    fn default() -> Self {
        RuleGenConfig {
            max_distance: MAX_DISTANCE,
            min_f1: 0.5,
            fallback_keywords: 4,
        }
    }
}

impl RuleGenConfig {
    pub fn validate(&self) -> Result<(), RuleGenError> {
        if !(1..=MAX_DISTANCE).contains(&self.max_distance) {
            return Err(RuleGenError::Config(format!(
                "max_distance must be in 1..={MAX_DISTANCE}, got {}",
                self.max_distance
            )));
        }
        if !(0.0..=1.0).contains(&self.min_f1) {
            return Err(RuleGenError::Config(format!("min_f1 must be in [0, 1], got {}", self.min_f1)));
        }
        if self.fallback_keywords == 0 {
            return Err(RuleGenError::Config("fallback_keywords must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedWord {
    pub word: String,
    pub weight: f64,
}

/// Words of `docs` (already stopword-filtered) by TF-IDF, where each doc is
/// one labeled comment. Ties break lexicographically.
pub fn rank_keywords(docs: &[Vec<String>]) -> Result<Vec<RankedWord>, RuleGenError> {
    rank_keywords_against(docs, docs)
}

/// Term counts come from `docs`; document frequencies from `background`,
/// which should contain `docs` (typically every labeled comment of the
/// language, so a word common to one behavior but rare elsewhere ranks high).
pub fn rank_keywords_against(
    docs: &[Vec<String>],
    background: &[Vec<String>],
) -> Result<Vec<RankedWord>, RuleGenError> {
    if docs.is_empty() || background.is_empty() {
        return Err(RuleGenError::EmptyCorpus);
    }
    let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
    for t in docs.iter().flatten() {
        *tf.entry(t.as_str()).or_default() += 1;
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in background {
        let distinct: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = background.len() as f64;
    let mut ranked: Vec<RankedWord> = tf
        .into_iter()
        .map(|(w, count)| {
            let d = df.get(w).copied().unwrap_or(0).max(1);
            let weight = if d >= background.len() { 0.0 } else { count as f64 * (n / d as f64).ln() };
            RankedWord { word: w.to_string(), weight }
        })
        .collect();
    ranked.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.word.cmp(&b.word)));
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordSet {
    /// In rank order.
    pub words: Vec<String>,
    pub comt_sets: BTreeMap<String, BTreeSet<usize>>,
}

impl KeywordSet {
    pub fn covered(&self) -> BTreeSet<usize> {
        self.comt_sets.values().flatten().copied().collect()
    }

    fn overlaps(&self, comments: &BTreeSet<usize>) -> bool {
        self.comt_sets.values().any(|s| !s.is_disjoint(comments))
    }
}

fn comment_sets(docs: &[Vec<String>]) -> HashMap<&str, BTreeSet<usize>> {
    let mut sets: HashMap<&str, BTreeSet<usize>> = HashMap::new();
    for (i, doc) in docs.iter().enumerate() {
        for t in doc {
            sets.entry(t.as_str()).or_default().insert(i);
        }
    }
    sets
}

/// Coverage traversal. A word joins the earliest set it overlaps; if it
/// overlaps several, those sets are unified. Stops as soon as every
/// comment holding at least one ranked word is covered.
pub fn build_keyword_sets(wordlist: &[String], docs: &[Vec<String>]) -> Vec<KeywordSet> {
    let comt = comment_sets(docs);
    let rank: HashMap<&str, usize> = wordlist.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let target: BTreeSet<usize> = docs
        .iter()
        .enumerate()
        .filter(|(_, d)| d.iter().any(|t| rank.contains_key(t.as_str())))
        .map(|(i, _)| i)
        .collect();
    let mut sets: Vec<KeywordSet> = Vec::new();
    let mut covered = BTreeSet::new();
    for word in wordlist {
        if covered.len() == target.len() {
            break;
        }
        let Some(cs) = comt.get(word.as_str()) else {
            continue;
        };
        let hits: Vec<usize> = (0..sets.len()).filter(|&i| sets[i].overlaps(cs)).collect();
        match hits.split_first() {
            None => sets.push(KeywordSet {
                words: vec![word.clone()],
                comt_sets: BTreeMap::from([(word.clone(), cs.clone())]),
            }),
            Some((&into, rest)) => {
                for &other in rest.iter().rev() {
                    let absorbed = sets.remove(other);
                    sets[into].words.extend(absorbed.words);
                    sets[into].comt_sets.extend(absorbed.comt_sets);
                }
                let set = &mut sets[into];
                set.words.push(word.clone());
                set.comt_sets.insert(word.clone(), cs.clone());
                set.words.sort_by_key(|w| rank[w.as_str()]);
            }
        }
        covered.extend(cs.iter().copied());
    }
    sets
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSelection {
    pub d: u32,
    pub f1: f64,
    /// F1 at d = 1, 2, ..., max_distance.
    pub table: Vec<f64>,
}

fn f1_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    2.0 * p * r / (p + r)
}

/// F1 of the ordered pair as a classifier for every d in 1..=max_distance;
/// returns the best d, smallest on ties.
pub fn select_distance(
    first: &str,
    second: &str,
    positives: &[Vec<String>],
    negatives: &[Vec<String>],
    max_distance: u32,
) -> Result<DistanceSelection, RuleGenError> {
    if positives.is_empty() {
        return Err(RuleGenError::NoPositives(format!("{first} {second}")));
    }
    let pos: Vec<Option<usize>> = positives.iter().map(|t| min_gap(first, second, t)).collect();
    let neg: Vec<Option<usize>> = negatives.iter().map(|t| min_gap(first, second, t)).collect();
    let hits = |gaps: &[Option<usize>], d: usize| gaps.iter().filter(|g| g.is_some_and(|g| g < d)).count();
    let table: Vec<f64> = (1..=max_distance as usize)
        .map(|d| {
            let tp = hits(&pos, d);
            f1_score(tp, hits(&neg, d), positives.len() - tp)
        })
        .collect();
    let (best, f1) = table
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &f)| if f > acc.1 { (i, f) } else { acc });
    Ok(DistanceSelection {
        d: best as u32 + 1,
        f1,
        table,
    })
}

fn single_keyword_f1(word: &str, positives: &[Vec<String>], negatives: &[Vec<String>]) -> f64 {
    let has = |t: &Vec<String>| t.iter().any(|x| x == word);
    let tp = positives.iter().filter(|t| has(t)).count();
    f1_score(tp, negatives.iter().filter(|t| has(t)).count(), positives.len() - tp)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeneratedRules {
    pub kept: Vec<SemanticRule>,
    pub dropped: Vec<SemanticRule>,
}

/// Rules for one behavior's keyword sets. Pairs need different tags
/// (neither `Other`) and at least one comment holding both words; each
/// ordering gets its own distance. Noun-only sets give single-keyword rules.
pub fn generate_rules(
    behavior: &BehaviorId,
    lang: &str,
    sets: &[KeywordSet],
    lexicon: &PosLexicon,
    positives: &[Vec<String>],
    negatives: &[Vec<String>],
    config: &RuleGenConfig,
) -> Result<GeneratedRules, RuleGenError> {
    if positives.is_empty() {
        return Err(RuleGenError::NoPositives(behavior.to_string()));
    }
    let mut out = GeneratedRules::default();
    let mut keep = |rule: SemanticRule| {
        let f1 = rule.train_f1.unwrap_or(0.0);
        if f1 > 0.0 && f1 >= config.min_f1 {
            out.kept.push(rule);
        } else {
            out.dropped.push(rule);
        }
    };
    for set in sets {
        let tags: Vec<PosTag> = set.words.iter().map(|w| lexicon.pos_of(w)).collect();
        if tags.iter().all(|&t| t == PosTag::Noun) {
            for w in &set.words {
                let mut rule = SemanticRule::single(behavior.as_str(), lang, w);
                rule.train_f1 = Some(single_keyword_f1(w, positives, negatives));
                keep(rule);
            }
            continue;
        }
        for a in 0..set.words.len() {
            for b in a + 1..set.words.len() {
                if tags[a] == tags[b] || tags[a] == PosTag::Other || tags[b] == PosTag::Other {
                    continue;
                }
                let (u, v) = (&set.words[a], &set.words[b]);
                if set.comt_sets[u].is_disjoint(&set.comt_sets[v]) {
                    continue;
                }
                for (first, second) in [(u, v), (v, u)] {
                    let sel = select_distance(first, second, positives, negatives, config.max_distance)?;
                    let mut rule = SemanticRule::pair(behavior.as_str(), lang, first, second, sel.d);
                    rule.train_f1 = Some(sel.f1);
                    keep(rule);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSource {
    Labeled,
    Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSummary {
    pub behavior: BehaviorId,
    pub source: RuleSource,
    pub comments: usize,
    pub keyword_sets: Vec<Vec<String>>,
    pub kept: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleExtraction {
    pub rules: Vec<SemanticRule>,
    pub behaviors: Vec<BehaviorSummary>,
}

struct Prepared {
    rank: Vec<Vec<String>>,
    matching: Vec<Vec<String>>,
}

fn prepare<'a>(
    texts: impl Iterator<Item = &'a str>,
    lang: &str,
    pipeline: &TextPipeline,
) -> Result<Prepared, TextError> {
    let mut p = Prepared { rank: Vec::new(), matching: Vec::new() };
    for t in texts {
        p.rank.push(pipeline.process(t, lang)?);
        p.matching.push(pipeline.match_tokens(t, lang)?);
    }
    Ok(p)
}

/// Rules for every behavior of the labeled corpus, in taxonomy order.
/// Behaviors without labeled comments fall back to their policy text.
pub fn extract_rules(
    labeled: &LabeledCorpus,
    policies: &[PolicyDocument],
    pipeline: &TextPipeline,
    lexicon: &PosLexicon,
    config: &RuleGenConfig,
) -> Result<RuleExtraction, RuleGenError> {
    config.validate()?;
    let taxonomy = load_taxonomy();
    let lang = labeled.lang.as_str();
    for b in labeled.behaviors.keys() {
        if !taxonomy.contains(b) {
            return Err(RuleGenError::UnknownBehavior(b.clone()));
        }
    }
    let mut prepared: BTreeMap<&BehaviorId, Prepared> = BTreeMap::new();
    for (b, texts) in &labeled.behaviors {
        if !texts.is_empty() {
            prepared.insert(b, prepare(texts.iter().map(|t| t.text.as_str()), lang, pipeline)?);
        }
    }
    let lang_policies: Vec<&PolicyDocument> = policies.iter().filter(|p| p.lang == lang).collect();
    let policy_tokens: Vec<Vec<String>> = lang_policies
        .iter()
        .map(|p| pipeline.process(&p.text, lang))
        .collect::<Result<_, _>>()?;

    let background: Vec<Vec<String>> = prepared.values().flat_map(|p| p.rank.iter().cloned()).collect();
    let negatives_for = |behavior: &BehaviorId| -> Vec<Vec<String>> {
        prepared
            .iter()
            .filter(|(b, _)| **b != behavior)
            .flat_map(|(_, p)| p.matching.iter().cloned())
            .collect()
    };

    let behaviors: Vec<&BehaviorId> = taxonomy.behaviors().iter().map(|b| &b.id).collect();
    let per_behavior: Vec<Option<(BehaviorSummary, GeneratedRules)>> = behaviors
        .par_iter()
        .map(|&behavior| -> Result<_, RuleGenError> {
            if let Some(p) = prepared.get(behavior) {
                let ranked = rank_keywords_against(&p.rank, &background)?;
                let words: Vec<String> = ranked.into_iter().map(|r| r.word).collect();
                let sets = build_keyword_sets(&words, &p.rank);
                let generated =
                    generate_rules(behavior, lang, &sets, lexicon, &p.matching, &negatives_for(behavior), config)?;
                return Ok(Some((
                    BehaviorSummary {
                        behavior: behavior.clone(),
                        source: RuleSource::Labeled,
                        comments: p.rank.len(),
                        keyword_sets: sets.iter().map(|s| s.words.clone()).collect(),
                        kept: generated.kept.len(),
                        dropped: generated.dropped.len(),
                    },
                    generated,
                )));
            }
            let Some(idx) = lang_policies.iter().position(|p| &p.behavior == behavior) else {
                return Ok(None);
            };
            let doc = &policy_tokens[idx];
            if doc.is_empty() {
                return Ok(None);
            }
            let words: Vec<String> = rank_keywords_against(std::slice::from_ref(doc), &policy_tokens)?
                .into_iter()
                .take(config.fallback_keywords)
                .map(|r| r.word)
                .collect();
            let set = KeywordSet {
                comt_sets: words.iter().map(|w| (w.clone(), BTreeSet::from([0]))).collect(),
                words,
            };
            let positives = vec![pipeline.match_tokens(&lang_policies[idx].text, lang)?];
            let generated = generate_rules(
                behavior,
                lang,
                std::slice::from_ref(&set),
                lexicon,
                &positives,
                &negatives_for(behavior),
                config,
            )?;
            Ok(Some((
                BehaviorSummary {
                    behavior: behavior.clone(),
                    source: RuleSource::Policy,
                    comments: 0,
                    keyword_sets: vec![set.words],
                    kept: generated.kept.len(),
                    dropped: generated.dropped.len(),
                },
                generated,
            )))
        })
        .collect::<Result<_, _>>()?;

    let mut out = RuleExtraction::default();
    let mut seen = HashSet::new();
    for (summary, generated) in per_behavior.into_iter().flatten() {
        for rule in generated.kept {
            if seen.insert((rule.behavior.clone(), rule.first.clone(), rule.second.clone())) {
                out.rules.push(rule);
            }
        }
        out.behaviors.push(summary);
    }
    Ok(out)
}
