//! Tokenization, stopword filtering, TF-IDF weighting and POS lookup.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");
const POS_LEXICON_EN: &str = include_str!("../data/pos_lexicon_en.tsv");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("no segmenter registered for language `{0}`")]
    UnsupportedLanguage(String),
    #[error("cannot build a TF-IDF index from an empty corpus")]
    EmptyCorpus,
    #[error("stopword file line {line}: {message}")]
    StopwordFormat { line: usize, message: String },
    #[error("lexicon line {line}: {message}")]
    LexiconFormat { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Splits raw text into lowercase word tokens for one language family.
pub trait Segmenter: Send + Sync {
    fn segment(&self, text: &str) -> Vec<String>;
}

/// Segmenter for space-delimited scripts. Letters and digits form words,
/// apostrophes are dropped ("it's" -> "its"), everything else separates.
#[derive(Debug, Default, Clone, Copy)]
pub struct WhitespaceSegmenter;

impl Segmenter for WhitespaceSegmenter {
    fn segment(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut current = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                current.extend(ch.to_lowercase());
            } else if ch == '\'' || ch == '\u{2019}' {
                continue;
            } else if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
        tokens
    }
}

/// Language tag -> segmenter. Only English ships with a segmenter;
/// other languages must register their own.
#[derive(Clone)]
pub struct TokenizerRegistry {
    segmenters: BTreeMap<String, Arc<dyn Segmenter>>,
}

impl fmt::Debug for TokenizerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TokenizerRegistry")
            .field("languages", &self.segmenters.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Default for TokenizerRegistry {
    fn default() -> Self {
        let mut reg = TokenizerRegistry::empty();
        reg.register("en", Arc::new(WhitespaceSegmenter));
        reg
    }
}

impl TokenizerRegistry {
    pub fn empty() -> Self {
        TokenizerRegistry {
            segmenters: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, lang: &str, segmenter: Arc<dyn Segmenter>) {
        self.segmenters.insert(lang.to_string(), segmenter);
    }

    pub fn supports(&self, lang: &str) -> bool {
        self.segmenters.contains_key(lang)
    }

    pub fn tokenize(&self, text: &str, lang: &str) -> Result<Vec<String>, TextError> {
        self.segmenters
            .get(lang)
            .map(|s| s.segment(text))
            .ok_or_else(|| TextError::UnsupportedLanguage(lang.to_string()))
    }
}

/// Tokenizes with the default registry.
pub fn tokenize(text: &str, lang: &str) -> Result<Vec<String>, TextError> {
    TokenizerRegistry::default().tokenize(text, lang)
}

/// Stopwords as three sets; the effective list is `(base - removed) + added`.
/// Multi-word entries are space-separated phrases matched as token bigrams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    base: HashSet<String>,
    removed: HashSet<String>,
    added: HashSet<String>,
    effective_words: HashSet<String>,
    effective_phrases: HashSet<(String, String)>,
    kept_phrases: HashSet<(String, String)>,
}

fn as_bigram(entry: &str) -> Option<(String, String)> {
    let mut parts = entry.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) => Some((a.to_string(), b.to_string())),
        _ => None,
    }
}

impl StopwordList {
    pub fn new(
        base: impl IntoIterator<Item = String>,
        removed: impl IntoIterator<Item = String>,
        added: impl IntoIterator<Item = String>,
    ) -> Result<Self, TextError> {
        let norm = |w: String| w.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let base: HashSet<String> = base.into_iter().map(norm).collect();
        let removed: HashSet<String> = removed.into_iter().map(norm).collect();
        let added: HashSet<String> = added.into_iter().map(norm).collect();
        if let Some(w) = removed.intersection(&added).next() {
            return Err(TextError::StopwordFormat {
                line: 0,
                message: format!("`{w}` is both removed and added"),
            });
        }
        let effective: HashSet<&String> = base
            .iter()
            .filter(|w| !removed.contains(*w))
            .chain(added.iter())
            .collect();
        let mut effective_words = HashSet::new();
        let mut effective_phrases = HashSet::new();
        for w in effective {
            match as_bigram(w) {
                Some(pair) => {
                    effective_phrases.insert(pair);
                }
                None if !w.contains(' ') => {
                    effective_words.insert(w.clone());
                }
                // phrases longer than two tokens are not supported
                None => {}
            }
        }
        let kept_phrases = removed.iter().filter_map(|w| as_bigram(w)).collect();
        Ok(StopwordList {
            base,
            removed,
            added,
            effective_words,
            effective_phrases,
            kept_phrases,
        })
    }

    /// Parses the `[base]` / `[removed]` / `[added]` section format.
    pub fn parse(content: &str) -> Result<Self, TextError> {
        let mut sections: [Vec<String>; 3] = Default::default();
        let mut current: Option<usize> = None;
        for (idx, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                current = Some(match line {
                    "[base]" => 0,
                    "[removed]" => 1,
                    "[added]" => 2,
                    other => {
                        return Err(TextError::StopwordFormat {
                            line: idx + 1,
                            message: format!("unknown section {other}"),
                        })
                    }
                });
                continue;
            }
            let Some(section) = current else {
                return Err(TextError::StopwordFormat {
                    line: idx + 1,
                    message: "entry before any section header".into(),
                });
            };
            sections[section].push(line.to_string());
        }
        let [base, removed, added] = sections;
        Self::new(base, removed, added)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&content)
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(STOPWORDS_EN).expect("bundled stopword list parses")
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.effective_words.contains(word)
    }

    pub fn base(&self) -> &HashSet<String> {
        &self.base
    }

    pub fn removed(&self) -> &HashSet<String> {
        &self.removed
    }

    pub fn added(&self) -> &HashSet<String> {
        &self.added
    }

    fn filter_once(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len());
        let mut i = 0;
        while i < tokens.len() {
            if i + 1 < tokens.len() {
                let pair = (tokens[i].clone(), tokens[i + 1].clone());
                if self.kept_phrases.contains(&pair) {
                    out.push(pair.0);
                    out.push(pair.1);
                    i += 2;
                    continue;
                }
                if self.effective_phrases.contains(&pair) {
                    i += 2;
                    continue;
                }
            }
            if !self.effective_words.contains(&tokens[i]) {
                out.push(tokens[i].clone());
            }
            i += 1;
        }
        out
    }

    /// Removes stopwords, keeping source order. Phrases are matched as
    /// bigrams before single words; a removed phrase such as "can not"
    /// keeps both of its tokens even if each alone is a stopword.
    /// Filtering repeats until nothing changes, so the result is idempotent.
    pub fn remove_stopwords(&self, tokens: &[String]) -> Vec<String> {
        let mut current = self.filter_once(tokens);
        loop {
            let next = self.filter_once(&current);
            if next.len() == current.len() {
                return current;
            }
            current = next;
        }
    }
}

pub fn remove_stopwords(tokens: &[String], stoplist: &StopwordList) -> Vec<String> {
    stoplist.remove_stopwords(tokens)
}

/// A document after tokenization and stopword removal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub source_len: usize,
}

/// Which token stream rule distances are measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceBasis {
    #[default]
    AfterStopwords,
    RawTokens,
}

/// Tokenizer registry plus per-language stopword lists.
#[derive(Debug, Clone)]
pub struct TextPipeline {
    pub tokenizers: TokenizerRegistry,
    stoplists: BTreeMap<String, StopwordList>,
    pub distance_basis: DistanceBasis,
}

impl Default for TextPipeline {
    fn default() -> Self {
        let mut stoplists = BTreeMap::new();
        stoplists.insert("en".to_string(), StopwordList::english());
        TextPipeline {
            tokenizers: TokenizerRegistry::default(),
            stoplists,
            distance_basis: DistanceBasis::AfterStopwords,
        }
    }
}

impl TextPipeline {
    pub fn set_stoplist(&mut self, lang: &str, list: StopwordList) {
        self.stoplists.insert(lang.to_string(), list);
    }

    pub fn stoplist(&self, lang: &str) -> Option<&StopwordList> {
        self.stoplists.get(lang)
    }

    pub fn supports(&self, lang: &str) -> bool {
        self.tokenizers.supports(lang)
    }

    /// Tokenize then drop stopwords (none dropped if the language has no list).
    pub fn process(&self, text: &str, lang: &str) -> Result<Vec<String>, TextError> {
        let tokens = self.tokenizers.tokenize(text, lang)?;
        Ok(match self.stoplists.get(lang) {
            Some(list) => list.remove_stopwords(&tokens),
            None => tokens,
        })
    }

    /// Token stream used for rule matching, per `distance_basis`.
    pub fn match_tokens(&self, text: &str, lang: &str) -> Result<Vec<String>, TextError> {
        match self.distance_basis {
            DistanceBasis::AfterStopwords => self.process(text, lang),
            DistanceBasis::RawTokens => self.tokenizers.tokenize(text, lang),
        }
    }

    pub fn document(&self, doc_id: &str, text: &str, lang: &str) -> Result<TokenizedDoc, TextError> {
        let raw = self.tokenizers.tokenize(text, lang)?;
        let source_len = raw.len();
        let tokens = match self.stoplists.get(lang) {
            Some(list) => list.remove_stopwords(&raw),
            None => raw,
        };
        Ok(TokenizedDoc {
            doc_id: doc_id.to_string(),
            tokens,
            source_len,
        })
    }
}

/// Corpus-level TF-IDF: weight(t) = (total occurrences of t) * ln(N / df(t)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfIndex {
    pub weights: BTreeMap<String, f64>,
    pub doc_freq: BTreeMap<String, usize>,
    pub num_docs: usize,
}

impl TfidfIndex {
    pub fn weight(&self, term: &str) -> Option<f64> {
        self.weights.get(term).copied()
    }

    /// Terms by descending weight, ties in lexicographic order.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut terms: Vec<(String, f64)> =
            self.weights.iter().map(|(t, &w)| (t.clone(), w)).collect();
        terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        terms
    }
}

pub fn build_tfidf(docs: &[TokenizedDoc]) -> Result<TfidfIndex, TextError> {
    if docs.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let mut tf: BTreeMap<String, usize> = BTreeMap::new();
    let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
    for doc in docs {
        let mut seen = HashSet::new();
        for t in &doc.tokens {
            *tf.entry(t.clone()).or_default() += 1;
            if seen.insert(t.as_str()) {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
        }
    }
    let n = docs.len() as f64;
    let weights = tf
        .iter()
        .map(|(t, &count)| {
            let df = doc_freq[t];
            let w = if df == docs.len() {
                0.0
            } else {
                count as f64 * (n / df as f64).ln()
            };
            (t.clone(), w)
        })
        .collect();
    Ok(TfidfIndex {
        weights,
        doc_freq,
        num_docs: docs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Other,
}

impl std::str::FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noun" => Ok(PosTag::Noun),
            "verb" => Ok(PosTag::Verb),
            "adjective" => Ok(PosTag::Adjective),
            "adverb" => Ok(PosTag::Adverb),
            "other" => Ok(PosTag::Other),
            _ => Err(format!("unknown tag `{s}`")),
        }
    }
}

/// Word -> coarse part of speech. Unknown words are nouns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PosLexicon {
    entries: HashMap<String, PosTag>,
}

impl PosLexicon {
    pub fn parse(content: &str) -> Result<Self, TextError> {
        let mut entries = HashMap::new();
        for (idx, raw) in content.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| TextError::LexiconFormat {
                line: idx + 1,
                message,
            };
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| err("expected word<TAB>tag".into()))?;
            let tag: PosTag = tag.trim().parse().map_err(err)?;
            if let Some(prev) = entries.insert(word.trim().to_lowercase(), tag) {
                if prev != tag {
                    return Err(err(format!("`{word}` tagged twice")));
                }
            }
        }
        Ok(PosLexicon { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&content)
    }

    pub fn english() -> Self {
        Self::parse(POS_LEXICON_EN).expect("bundled lexicon parses")
    }

    pub fn insert(&mut self, word: &str, tag: PosTag) {
        self.entries.insert(word.to_lowercase(), tag);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pos_of(&self, word: &str) -> PosTag {
        self.entries.get(word).copied().unwrap_or(PosTag::Noun)
    }
}

pub fn pos_of(word: &str, lexicon: &PosLexicon) -> PosTag {
    lexicon.pos_of(word)
}
