//! Biterm topic model for short texts.
//!
//! Every unordered word pair in a document is a biterm. Training runs
//! collapsed Gibbs sampling over one topic assignment per biterm; the
//! topic-word distributions `phi` and the corpus topic mixture `theta` are
//! read off the final sampler state. Inference composes
//! `P(z|d) = sum_b P(z|b) p(b|d)` with `P(z|b)` from Bayes' rule.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const FORMAT_TAG: &str = "policywatch-btm";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BtmError {
    #[error("cannot train on an empty biterm set")]
    NoBiterms,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("word index {0} is outside the vocabulary")]
    OutOfVocabulary(usize),
    #[error("word `{0}` is not in the model vocabulary")]
    UnknownWord(String),
    #[error("document has no biterms")]
    EmptyDocument,
    #[error("model file: {0}")]
    Format(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Indexed word list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Words get indices in order of first appearance.
    pub fn build<'a, I, D>(docs: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        let mut vocab = Vocabulary::default();
        for doc in docs {
            for w in doc {
                vocab.insert(w);
            }
        }
        vocab
    }

    pub fn from_words(words: Vec<String>) -> Result<Self, BtmError> {
        let mut vocab = Vocabulary::default();
        for w in words {
            if vocab.index.contains_key(&w) {
                return Err(BtmError::Format(format!("duplicate vocabulary word `{w}`")));
            }
            vocab.insert(&w);
        }
        Ok(vocab)
    }

    fn insert(&mut self, word: &str) -> usize {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        let i = self.words.len();
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), i);
        i
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Maps tokens to ids, dropping out-of-vocabulary tokens.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.id(t)).collect()
    }
}

/// Unordered word pair, stored with `first <= second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Biterm {
    first: usize,
    second: usize,
}

impl Biterm {
    pub fn new(a: usize, b: usize) -> Self {
        Biterm {
            first: a.min(b),
            second: a.max(b),
        }
    }

    pub fn words(self) -> (usize, usize) {
        (self.first, self.second)
    }
}

/// All unordered pairs of distinct positions; the whole document is the
/// context window.
pub fn extract_biterms(doc: &[usize]) -> Vec<Biterm> {
    let mut out = Vec::with_capacity(doc.len() * doc.len().saturating_sub(1) / 2);
    for i in 0..doc.len() {
        for j in i + 1..doc.len() {
            out.push(Biterm::new(doc[i], doc[j]));
        }
    }
    out
}

/// Normalized frequency of `b` among the document's biterms.
pub fn biterm_given_doc(doc: &[usize], b: Biterm) -> Result<f64, BtmError> {
    let biterms = extract_biterms(doc);
    if biterms.is_empty() {
        return Err(BtmError::EmptyDocument);
    }
    let hits = biterms.iter().filter(|&&x| x == b).count();
    Ok(hits as f64 / biterms.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BtmConfig {
    pub k: usize,
    /// Defaults to `50 / k` when unset.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for BtmConfig {
    fn default() -> Self {
        BtmConfig {
            k: 26,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            seed: 42,
        }
    }
}

impl BtmConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }

    pub fn validate(&self) -> Result<(), BtmError> {
        if self.k == 0 {
            return Err(BtmError::Config("k must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(BtmError::Config("iterations must be at least 1".into()));
        }
        let alpha = self.alpha();
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(BtmError::Config(format!("alpha must be > 0, got {alpha}")));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(BtmError::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Topic distribution of a document, or `Undecidable` when fewer than two
/// in-vocabulary tokens remain.
#[derive(Debug, Clone, PartialEq)]
pub enum DocTopics {
    Distribution(Vec<f64>),
    Undecidable,
}

impl DocTopics {
    pub fn distribution(&self) -> Option<&[f64]> {
        match self {
            DocTopics::Distribution(p) => Some(p),
            DocTopics::Undecidable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtmModel {
    k: usize,
    alpha: f64,
    beta: f64,
    iterations: usize,
    seed: u64,
    vocab: Vocabulary,
    /// `phi[z][w]`
    phi: Vec<Vec<f64>>,
    theta: Vec<f64>,
}

struct Sampler {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    assignment: Vec<usize>,
    topic_biterms: Vec<usize>,
    topic_word: Vec<usize>,
}

impl Sampler {
    fn add(&mut self, b: Biterm, z: usize, sign: isize) {
        let (i, j) = b.words();
        let apply = |x: &mut usize| *x = x.checked_add_signed(sign).expect("count underflow");
        apply(&mut self.topic_biterms[z]);
        apply(&mut self.topic_word[z * self.v + i]);
        apply(&mut self.topic_word[z * self.v + j]);
    }

    fn conditional(&self, b: Biterm, weights: &mut [f64]) {
        let (i, j) = b.words();
        let vbeta = self.v as f64 * self.beta;
        for (z, w) in weights.iter_mut().enumerate() {
            let words_in_topic = 2.0 * self.topic_biterms[z] as f64 + vbeta;
            *w = (self.topic_biterms[z] as f64 + self.alpha)
                * (self.topic_word[z * self.v + i] as f64 + self.beta)
                * (self.topic_word[z * self.v + j] as f64 + self.beta)
                / (words_in_topic * words_in_topic);
        }
    }
}

fn sample_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (z, &w) in weights.iter().enumerate() {
        if u < w {
            return z;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Collapsed Gibbs sampling. Single-threaded and fully determined by the
/// seed. The conditional for biterm b = (w_i, w_j) is
/// `(n_z + alpha)(n_{w_i|z} + beta)(n_{w_j|z} + beta) / (n_{.|z} + V beta)^2`.
pub fn train(vocab: Vocabulary, biterms: &[Biterm], config: &BtmConfig) -> Result<BtmModel, BtmError> {
    config.validate()?;
    if biterms.is_empty() {
        return Err(BtmError::NoBiterms);
    }
    let v = vocab.len();
    if let Some(b) = biterms.iter().find(|b| b.words().1 >= v) {
        return Err(BtmError::OutOfVocabulary(b.words().1));
    }
    let k = config.k;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut s = Sampler {
        k,
        v,
        alpha: config.alpha(),
        beta: config.beta,
        assignment: Vec::with_capacity(biterms.len()),
        topic_biterms: vec![0; k],
        topic_word: vec![0; k * v],
    };
    for &b in biterms {
        let z = rng.gen_range(0..k);
        s.assignment.push(z);
        s.add(b, z, 1);
    }
    let mut weights = vec![0.0; k];
    for _ in 0..config.iterations {
        for (n, &b) in biterms.iter().enumerate() {
            let old = s.assignment[n];
            s.add(b, old, -1);
            s.conditional(b, &mut weights);
            let new = sample_index(&mut rng, &weights);
            s.assignment[n] = new;
            s.add(b, new, 1);
        }
    }

    let vbeta = v as f64 * s.beta;
    let phi = (0..s.k)
        .map(|z| {
            let denom = 2.0 * s.topic_biterms[z] as f64 + vbeta;
            (0..v)
                .map(|w| (s.topic_word[z * v + w] as f64 + s.beta) / denom)
                .collect()
        })
        .collect();
    let denom = biterms.len() as f64 + k as f64 * s.alpha;
    let theta = s
        .topic_biterms
        .iter()
        .map(|&n| (n as f64 + s.alpha) / denom)
        .collect();
    Ok(BtmModel {
        k,
        alpha: s.alpha,
        beta: s.beta,
        iterations: config.iterations,
        seed: config.seed,
        vocab,
        phi,
        theta,
    })
}

/// Builds the vocabulary and biterm set from token lists and trains.
pub fn train_on_documents(docs: &[Vec<String>], config: &BtmConfig) -> Result<BtmModel, BtmError> {
    let vocab = Vocabulary::build(docs.iter());
    let biterms: Vec<Biterm> = docs
        .iter()
        .flat_map(|d| extract_biterms(&vocab.encode(d)))
        .collect();
    train(vocab, &biterms, config)
}

impl BtmModel {
    /// Assembles a model from explicit parameters, checking shapes.
    pub fn from_parts(
        vocab: Vocabulary,
        theta: Vec<f64>,
        phi: Vec<Vec<f64>>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self, BtmError> {
        let k = theta.len();
        if k == 0 || phi.len() != k || phi.iter().any(|row| row.len() != vocab.len()) {
            return Err(BtmError::Format("theta/phi shape mismatch".into()));
        }
        Ok(BtmModel {
            k,
            alpha,
            beta,
            iterations: 0,
            seed: 0,
            vocab,
            phi,
            theta,
        })
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    /// Highest-probability words of a topic.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<(&str, f64)> {
        let mut ids: Vec<usize> = (0..self.vocab.len()).collect();
        ids.sort_by(|&a, &b| {
            self.phi[topic][b]
                .total_cmp(&self.phi[topic][a])
                .then(a.cmp(&b))
        });
        ids.into_iter()
            .take(n)
            .map(|w| (self.vocab.word(w).unwrap_or_default(), self.phi[topic][w]))
            .collect()
    }

    /// `P(z|b)` by Bayes' rule over `theta_z phi_{i|z} phi_{j|z}`.
    pub fn topic_given_biterm(&self, b: Biterm) -> Result<Vec<f64>, BtmError> {
        let (i, j) = b.words();
        for w in [i, j] {
            if w >= self.vocab.len() {
                return Err(BtmError::OutOfVocabulary(w));
            }
        }
        let joint: Vec<f64> = (0..self.k)
            .map(|z| self.theta[z] * self.phi[z][i] * self.phi[z][j])
            .collect();
        let total: f64 = joint.iter().sum();
        Ok(joint.into_iter().map(|p| p / total).collect())
    }

    pub fn topic_given_word_pair(&self, a: &str, b: &str) -> Result<Vec<f64>, BtmError> {
        let id = |w: &str| self.vocab.id(w).ok_or_else(|| BtmError::UnknownWord(w.to_string()));
        self.topic_given_biterm(Biterm::new(id(a)?, id(b)?))
    }

    /// `P(z|d)`; out-of-vocabulary tokens are dropped first.
    pub fn topic_given_doc(&self, tokens: &[String]) -> DocTopics {
        let ids = self.vocab.encode(tokens);
        let biterms = extract_biterms(&ids);
        if biterms.is_empty() {
            return DocTopics::Undecidable;
        }
        let total = biterms.len() as f64;
        let mut counts: BTreeMap<Biterm, usize> = BTreeMap::new();
        for b in biterms {
            *counts.entry(b).or_default() += 1;
        }
        let mut out = vec![0.0; self.k];
        for (b, n) in counts {
            let pzb = self
                .topic_given_biterm(b)
                .expect("encoded ids are in vocabulary");
            let pbd = n as f64 / total;
            for (acc, p) in out.iter_mut().zip(pzb) {
                *acc += p * pbd;
            }
        }
        DocTopics::Distribution(out)
    }

    /// `ln P(B) = sum_b ln sum_z theta_z phi_{i|z} phi_{j|z}`.
    pub fn log_likelihood(&self, biterms: &[Biterm]) -> f64 {
        biterms
            .iter()
            .map(|b| {
                let (i, j) = b.words();
                (0..self.k)
                    .map(|z| self.theta[z] * self.phi[z][i] * self.phi[z][j])
                    .sum::<f64>()
                    .ln()
            })
            .sum()
    }

    /// Text layout, one item per line:
    ///
    /// ```text
    /// policywatch-btm 1
    /// k <K>
    /// alpha <a>
    /// beta <b>
    /// iterations <n>
    /// seed <s>
    /// vocab <V>
    /// <word>            (V lines)
    /// theta
    /// <K space-separated reals>
    /// phi
    /// <V space-separated reals>   (K lines)
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_TAG} {FORMAT_VERSION}");
        let _ = writeln!(out, "k {}", self.k);
        let _ = writeln!(out, "alpha {}", self.alpha);
        let _ = writeln!(out, "beta {}", self.beta);
        let _ = writeln!(out, "iterations {}", self.iterations);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "vocab {}", self.vocab.len());
        for w in self.vocab.words() {
            let _ = writeln!(out, "{w}");
        }
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "theta\n{}", join(&self.theta));
        let _ = writeln!(out, "phi");
        for row in &self.phi {
            let _ = writeln!(out, "{}", join(row));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, BtmError> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| BtmError::Format(format!("unexpected end of file, expected {what}")))
        };
        let header = next("header")?;
        if header != format!("{FORMAT_TAG} {FORMAT_VERSION}") {
            return Err(BtmError::Format(format!("unsupported header `{header}`")));
        }
        fn field<T: std::str::FromStr>(line: &str, key: &str) -> Result<T, BtmError> {
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| BtmError::Format(format!("expected `{key} <value>`, got `{line}`")))
        }
        let k: usize = field(next("k")?, "k")?;
        let alpha: f64 = field(next("alpha")?, "alpha")?;
        let beta: f64 = field(next("beta")?, "beta")?;
        let iterations: usize = field(next("iterations")?, "iterations")?;
        let seed: u64 = field(next("seed")?, "seed")?;
        let v: usize = field(next("vocab")?, "vocab")?;
        let mut words = Vec::with_capacity(v);
        for _ in 0..v {
            words.push(next("vocabulary word")?.to_string());
        }
        let vocab = Vocabulary::from_words(words)?;
        let reals = |line: &str, n: usize| -> Result<Vec<f64>, BtmError> {
            let xs: Vec<f64> = line
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|_| BtmError::Format(format!("bad number `{x}`"))))
                .collect::<Result<_, _>>()?;
            if xs.len() != n {
                return Err(BtmError::Format(format!("expected {n} values, got {}", xs.len())));
            }
            Ok(xs)
        };
        if next("theta")? != "theta" {
            return Err(BtmError::Format("expected `theta`".into()));
        }
        let theta = reals(next("theta values")?, k)?;
        if next("phi")? != "phi" {
            return Err(BtmError::Format("expected `phi`".into()));
        }
        let mut phi = Vec::with_capacity(k);
        for _ in 0..k {
            phi.push(reals(next("phi row")?, v)?);
        }
        Ok(BtmModel {
            k,
            alpha,
            beta,
            iterations,
            seed,
            vocab,
            phi,
            theta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BtmError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| BtmError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BtmError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| BtmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    fn two_cluster_docs() -> Vec<Vec<String>> {
        let mut docs = vec![words(&["a", "b"]); 20];
        docs.extend(vec![words(&["c", "d"]); 20]);
        docs
    }

    fn separated_config(seed: u64) -> BtmConfig {
        BtmConfig {
            k: 2,
            alpha: Some(1.0),
            beta: 0.01,
            iterations: 500,
            seed,
        }
    }

    #[test]
    fn biterm_extraction() {
        assert!(extract_biterms(&[0]).is_empty());
        assert_eq!(
            extract_biterms(&[0, 1, 2]),
            vec![Biterm::new(0, 1), Biterm::new(0, 2), Biterm::new(1, 2)]
        );
        assert_eq!(extract_biterms(&[3, 3]), vec![Biterm::new(3, 3)]);
        assert_eq!(Biterm::new(5, 2).words(), (2, 5));
    }

    #[test]
    fn biterm_frequency_in_doc() {
        assert_eq!(biterm_given_doc(&[0, 1], Biterm::new(0, 1)).unwrap(), 1.0);
        assert!((biterm_given_doc(&[0, 1, 2], Biterm::new(1, 0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(biterm_given_doc(&[0, 1, 2], Biterm::new(0, 7)).unwrap(), 0.0);
        assert!(matches!(biterm_given_doc(&[0], Biterm::new(0, 0)), Err(BtmError::EmptyDocument)));
    }

    #[test]
    fn single_topic_is_forced() {
        let docs = vec![words(&["x", "y", "z"]), words(&["x", "y"])];
        let cfg = BtmConfig { k: 1, iterations: 10, ..Default::default() };
        let m = train_on_documents(&docs, &cfg).unwrap();
        assert_eq!(m.theta(), &[1.0]);
        // 4 biterms -> 8 word slots: x:3, y:3, z:2
        let denom = 8.0 + 3.0 * 0.01;
        let x = m.vocab().id("x").unwrap();
        let z = m.vocab().id("z").unwrap();
        assert!((m.phi()[0][x] - 3.01 / denom).abs() < 1e-12);
        assert!((m.phi()[0][z] - 2.01 / denom).abs() < 1e-12);
        assert_eq!(m.topic_given_word_pair("x", "z").unwrap(), vec![1.0]);
        assert_eq!(m.topic_given_doc(&words(&["x", "y"])), DocTopics::Distribution(vec![1.0]));
    }

    #[test]
    fn empty_biterms_and_bad_config_error() {
        let cfg = BtmConfig::default();
        assert!(matches!(
            train(Vocabulary::default(), &[], &cfg),
            Err(BtmError::NoBiterms)
        ));
        let docs = vec![words(&["a", "b"])];
        assert!(train_on_documents(&docs, &BtmConfig { k: 0, ..cfg }).is_err());
        assert!(train_on_documents(&docs, &BtmConfig { iterations: 0, ..cfg }).is_err());
        assert!(train_on_documents(&docs, &BtmConfig { beta: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn default_alpha_is_50_over_k() {
        let cfg = BtmConfig { k: 25, ..Default::default() };
        assert_eq!(cfg.alpha(), 2.0);
    }

    #[test]
    fn separates_two_clusters_across_seeds() {
        for seed in 0..10 {
            let m = train_on_documents(&two_cluster_docs(), &separated_config(seed)).unwrap();
            let v = m.vocab();
            let (a, b, c, d) = (
                v.id("a").unwrap(),
                v.id("b").unwrap(),
                v.id("c").unwrap(),
                v.id("d").unwrap(),
            );
            let ab: Vec<f64> = (0..2).map(|z| m.phi()[z][a] + m.phi()[z][b]).collect();
            let cd: Vec<f64> = (0..2).map(|z| m.phi()[z][c] + m.phi()[z][d]).collect();
            let t_ab = if ab[0] > ab[1] { 0 } else { 1 };
            assert!(ab[t_ab] >= 0.95, "seed {seed}: {ab:?}");
            assert!(cd[1 - t_ab] >= 0.95, "seed {seed}: {cd:?}");
            let p = m.topic_given_word_pair("a", "b").unwrap();
            assert!(p[t_ab] > 0.9);
        }
    }

    #[test]
    fn trained_likelihood_beats_uniform() {
        let docs = two_cluster_docs();
        let m = train_on_documents(&docs, &separated_config(3)).unwrap();
        let biterms: Vec<Biterm> = docs
            .iter()
            .flat_map(|d| extract_biterms(&m.vocab().encode(d)))
            .collect();
        let v = m.vocab().len();
        let uniform = BtmModel::from_parts(
            m.vocab().clone(),
            vec![0.5; 2],
            vec![vec![1.0 / v as f64; v]; 2],
            1.0,
            0.01,
        )
        .unwrap();
        assert!(m.log_likelihood(&biterms) >= uniform.log_likelihood(&biterms));
        // symmetric model gives a uniform posterior
        assert_eq!(uniform.topic_given_word_pair("a", "c").unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn likelihood_is_invariant_under_topic_permutation() {
        let docs = two_cluster_docs();
        let m = train_on_documents(&docs, &separated_config(1)).unwrap();
        let biterms: Vec<Biterm> = docs
            .iter()
            .flat_map(|d| extract_biterms(&m.vocab().encode(d)))
            .collect();
        let mut theta = m.theta().to_vec();
        let mut phi = m.phi().to_vec();
        theta.reverse();
        phi.reverse();
        let permuted = BtmModel::from_parts(m.vocab().clone(), theta, phi, 1.0, 0.01).unwrap();
        let (a, b) = (m.log_likelihood(&biterms), permuted.log_likelihood(&biterms));
        assert!((a - b).abs() <= 1e-9 * a.abs());
    }

    #[test]
    fn out_of_vocabulary_handling() {
        let m = train_on_documents(&two_cluster_docs(), &separated_config(0)).unwrap();
        assert!(matches!(m.topic_given_biterm(Biterm::new(0, 99)), Err(BtmError::OutOfVocabulary(99))));
        assert!(matches!(m.topic_given_word_pair("a", "zz"), Err(BtmError::UnknownWord(_))));
        assert_eq!(m.topic_given_doc(&words(&["a", "zz", "qq"])), DocTopics::Undecidable);
        assert!(m.topic_given_doc(&words(&["a", "zz", "c"])).distribution().is_some());
    }

    #[test]
    fn training_is_bit_reproducible() {
        let a = train_on_documents(&two_cluster_docs(), &separated_config(9)).unwrap();
        let b = train_on_documents(&two_cluster_docs(), &separated_config(9)).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn text_format_round_trips_exactly() {
        let m = train_on_documents(&two_cluster_docs(), &separated_config(2)).unwrap();
        let back = BtmModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(BtmModel::from_text("policywatch-btm 2\n").is_err());
        assert!(BtmModel::from_text(&m.to_text().replace("theta\n", "thetas\n")).is_err());
    }

    fn assert_simplex(xs: &[f64]) {
        assert!(xs.iter().all(|&x| x >= 0.0));
        assert!((xs.iter().sum::<f64>() - 1.0).abs() < 1e-9, "sum {}", xs.iter().sum::<f64>());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn trained_parameters_are_distributions(
            docs in prop::collection::vec(prop::collection::vec(0u8..8, 2..6), 1..8),
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let docs: Vec<Vec<String>> = docs.iter()
                .map(|d| d.iter().map(|w| format!("w{w}")).collect())
                .collect();
            let cfg = BtmConfig { k, alpha: None, beta: 0.01, iterations: 20, seed };
            let m = train_on_documents(&docs, &cfg).unwrap();
            assert_simplex(m.theta());
            for row in m.phi() {
                assert_simplex(row);
            }
            for d in &docs {
                if let DocTopics::Distribution(p) = m.topic_given_doc(d) {
                    assert_simplex(&p);
                }
            }
        }
    }
}
