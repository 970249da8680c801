//! Aggregates over match records: per-app violation scores, rating
//! distributions, market reaction times, the similarity baseline and
//! precision/recall evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_taxonomy, normalize_market, AppRecord, BehaviorId, Category, Comment, PolicyMatrix};
use crate::matcher::MatchRecord;
use crate::textprep::TextPipeline;
use crate::triage::LabeledCorpus;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid weight for {0}: {1}")]
    Weight(String, f64),
    #[error("labeled corpus is empty")]
    EmptyCorpus,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryWeights(pub BTreeMap<Category, f64>);

impl Default for CategoryWeights {
    fn default() -> Self {
        CategoryWeights(BTreeMap::from([
            (Category::Security, 3.0),
            (Category::Content, 2.0),
            (Category::IllegitimateDeveloperBehavior, 2.0),
            (Category::Advertisement, 1.5),
            (Category::FunctionalityPerformance, 1.0),
        ]))
    }
}

impl CategoryWeights {
    pub fn uniform(w: f64) -> Self {
        CategoryWeights(Category::ALL.iter().map(|&c| (c, w)).collect())
    }

    pub fn get(&self, c: Category) -> f64 {
        self.0.get(&c).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        for c in Category::ALL {
            let w = self.get(c);
            if !w.is_finite() || w < 0.0 {
                return Err(ReportError::Weight(c.as_str().to_string(), w));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppReport {
    pub app_id: String,
    pub market: String,
    pub per_behavior_counts: BTreeMap<BehaviorId, usize>,
    pub violation_score: f64,
    /// `None` when the market is not in the policy matrix.
    pub declared_hits: Option<BTreeSet<BehaviorId>>,
    pub undeclared_hits: Option<BTreeSet<BehaviorId>>,
    pub top_comments: BTreeMap<BehaviorId, Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn violation_score(counts: &BTreeMap<BehaviorId, usize>, weights: &CategoryWeights) -> f64 {
    let taxonomy = load_taxonomy();
    counts
        .iter()
        .map(|(b, &n)| {
            let w = taxonomy.category_of(b).map_or(0.0, |c| weights.get(c));
            w * (n as f64).ln_1p()
        })
        .sum()
}

const TOP_COMMENTS: usize = 5;

/// Per behavior, the most recent match of each rule (newest first, at most five).
fn top_comments(matches: &[&MatchRecord]) -> BTreeMap<BehaviorId, Vec<String>> {
    let mut latest: BTreeMap<(&BehaviorId, &str), &MatchRecord> = BTreeMap::new();
    for m in matches {
        for rule in &m.rule_refs {
            let slot = latest.entry((&m.behavior, rule.as_str())).or_insert(m);
            if (m.posted_at, &m.comment_id) > (slot.posted_at, &slot.comment_id) {
                *slot = m;
            }
        }
    }
    let mut per: BTreeMap<BehaviorId, Vec<&MatchRecord>> = BTreeMap::new();
    for ((b, _), m) in latest {
        per.entry(b.clone()).or_default().push(m);
    }
    per.into_iter()
        .map(|(b, mut ms)| {
            ms.sort_by(|x, y| (y.posted_at, &y.comment_id).cmp(&(x.posted_at, &x.comment_id)));
            let mut ids: Vec<String> = Vec::new();
            for m in ms {
                if !ids.contains(&m.comment_id) && ids.len() < TOP_COMMENTS {
                    ids.push(m.comment_id.clone());
                }
            }
            (b, ids)
        })
        .collect()
}

pub fn score_app(
    app_id: &str,
    market: &str,
    matches: &[&MatchRecord],
    weights: &CategoryWeights,
    matrix: &PolicyMatrix,
) -> AppReport {
    let mut counts: BTreeMap<BehaviorId, usize> = BTreeMap::new();
    for m in matches {
        *counts.entry(m.behavior.clone()).or_default() += 1;
    }
    let mut warnings = Vec::new();
    let (declared, undeclared) = if matrix.knows_market(market) {
        let (d, u): (BTreeSet<_>, BTreeSet<_>) = counts
            .keys()
            .cloned()
            .partition(|b| matrix.is_declared(market, b) == Some(true));
        (Some(d), Some(u))
    } else {
        let w = format!("market `{market}` is not in the policy matrix; declared/undeclared split omitted");
        log::warn!("{w}");
        warnings.push(w);
        (None, None)
    };
    AppReport {
        app_id: app_id.to_string(),
        market: market.to_string(),
        violation_score: violation_score(&counts, weights),
        per_behavior_counts: counts,
        declared_hits: declared,
        undeclared_hits: undeclared,
        top_comments: top_comments(matches),
        warnings,
    }
}

/// One report per (app, normalized market), highest score first.
pub fn app_reports(matches: &[MatchRecord], weights: &CategoryWeights, matrix: &PolicyMatrix) -> Vec<AppReport> {
    let mut groups: BTreeMap<(String, String), Vec<&MatchRecord>> = BTreeMap::new();
    for m in matches {
        groups
            .entry((m.app_id.clone(), normalize_market(&m.market)))
            .or_default()
            .push(m);
    }
    let mut reports: Vec<AppReport> = groups
        .into_iter()
        .map(|((app, market), ms)| score_app(&app, &market, &ms, weights, matrix))
        .collect();
    reports.sort_by(|a, b| {
        b.violation_score
            .total_cmp(&a.violation_score)
            .then_with(|| (&a.app_id, &a.market).cmp(&(&b.app_id, &b.market)))
    });
    reports
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarRow {
    pub star: u8,
    pub total: usize,
    pub matched: usize,
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingBreakdown {
    pub exclude_blank: bool,
    pub rows: Vec<StarRow>,
}

/// Share of comments per star rating that matched at least one rule. With
/// `exclude_blank`, comments without text leave the denominator.
pub fn rating_breakdown(comments: &[Comment], matches: &[MatchRecord], exclude_blank: bool) -> RatingBreakdown {
    let matched: HashSet<&str> = matches.iter().map(|m| m.comment_id.as_str()).collect();
    let mut total = [0usize; 5];
    let mut hit = [0usize; 5];
    for c in comments {
        if !(1..=5).contains(&c.rating) || (exclude_blank && c.is_blank()) {
            continue;
        }
        let i = c.rating as usize - 1;
        total[i] += 1;
        if matched.contains(c.id.as_str()) {
            hit[i] += 1;
        }
    }
    RatingBreakdown {
        exclude_blank,
        rows: (0..5)
            .map(|i| StarRow {
                star: i as u8 + 1,
                total: total[i],
                matched: hit[i],
                fraction: (total[i] > 0).then(|| hit[i] as f64 / total[i] as f64),
            })
            .collect(),
    }
}

/// Whole days from the earliest dated match of the app to its removal.
pub fn reaction_time(app: &AppRecord, matches: &[MatchRecord]) -> Option<i64> {
    let removed = app.removed_at?;
    let market = normalize_market(&app.market);
    let first = matches
        .iter()
        .filter(|m| m.app_id == app.app_id && normalize_market(&m.market) == market)
        .filter_map(|m| m.posted_at)
        .min()?;
    let days = (removed - first).num_days();
    (days >= 0).then_some(days)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionTime {
    pub app_id: String,
    pub market: String,
    pub days: Option<i64>,
}

pub fn reaction_times(apps: &[AppRecord], matches: &[MatchRecord]) -> Vec<ReactionTime> {
    apps.iter()
        .map(|a| ReactionTime {
            app_id: a.app_id.clone(),
            market: a.market.clone(),
            days: reaction_time(a, matches),
        })
        .collect()
}

/// Nearest-labeled-comment classifier over TF-IDF vectors, the comparison
/// point for the rule matcher. idf is smoothed: ln((1 + N) / (1 + df)) + 1.
#[derive(Debug, Clone)]
pub struct SimilarityBaseline {
    lang: String,
    idf: HashMap<String, f64>,
    entries: Vec<(BehaviorId, HashMap<String, f64>)>,
}

fn unit_vector(tokens: &[String], idf: &HashMap<String, f64>) -> HashMap<String, f64> {
    let mut v: HashMap<String, f64> = HashMap::new();
    for t in tokens {
        if let Some(w) = idf.get(t) {
            *v.entry(t.clone()).or_default() += w;
        }
    }
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.values_mut().for_each(|x| *x /= norm);
    }
    v
}

impl SimilarityBaseline {
    pub fn fit(labeled: &LabeledCorpus, pipeline: &TextPipeline) -> Result<Self, ReportError> {
        let lang = labeled.lang.clone();
        let mut docs: Vec<(BehaviorId, Vec<String>)> = Vec::new();
        for (b, texts) in &labeled.behaviors {
            for t in texts {
                let tokens = pipeline.process(&t.text, &lang).unwrap_or_default();
                docs.push((b.clone(), tokens));
            }
        }
        if docs.is_empty() {
            return Err(ReportError::EmptyCorpus);
        }
        let mut df: HashMap<&str, usize> = HashMap::new();
        for (_, tokens) in &docs {
            for t in tokens.iter().map(String::as_str).collect::<HashSet<_>>() {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = docs.len() as f64;
        let idf: HashMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t.to_string(), ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
            .collect();
        let entries = docs
            .iter()
            .map(|(b, tokens)| (b.clone(), unit_vector(tokens, &idf)))
            .collect();
        Ok(SimilarityBaseline { lang, idf, entries })
    }

    /// Behavior of the most similar labeled text; `None` when the text has
    /// no in-vocabulary token. Ties go to the earlier labeled entry.
    pub fn classify(&self, text: &str, pipeline: &TextPipeline) -> Option<BehaviorId> {
        let tokens = pipeline.process(text, &self.lang).ok()?;
        let q = unit_vector(&tokens, &self.idf);
        if q.is_empty() {
            return None;
        }
        let mut best: Option<(f64, &BehaviorId)> = None;
        for (b, v) in &self.entries {
            let sim: f64 = q.iter().map(|(t, x)| x * v.get(t).copied().unwrap_or(0.0)).sum();
            if best.is_none_or(|(s, _)| sim > s) {
                best = Some((sim, b));
            }
        }
        best.map(|(_, b)| b.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `None` marks NA: no gold and no predictions for the behavior.
    pub per_behavior: BTreeMap<BehaviorId, Option<Prf>>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
}

/// Multi-label evaluation over (comment id, behavior) pairs. `behaviors`
/// lists rows to report; NA rows have neither gold nor predictions.
pub fn evaluate(
    predictions: &[(String, BehaviorId)],
    gold: &[(String, BehaviorId)],
    behaviors: &[BehaviorId],
) -> Evaluation {
    let pred: HashSet<(&str, &BehaviorId)> = predictions.iter().map(|(c, b)| (c.as_str(), b)).collect();
    let gold: HashSet<(&str, &BehaviorId)> = gold.iter().map(|(c, b)| (c.as_str(), b)).collect();
    let mut per_behavior = BTreeMap::new();
    let (mut ps, mut rs, mut fs) = (Vec::new(), Vec::new(), Vec::new());
    for b in behaviors {
        let g = gold.iter().filter(|(_, x)| *x == b).count();
        let p = pred.iter().filter(|(_, x)| *x == b).count();
        if g == 0 && p == 0 {
            per_behavior.insert(b.clone(), None);
            continue;
        }
        let tp = pred.iter().filter(|pair| pair.1 == b && gold.contains(*pair)).count();
        let precision = if p > 0 { Some(tp as f64 / p as f64) } else { Some(0.0) };
        let recall = (g > 0).then(|| tp as f64 / g as f64);
        let f1 = match (precision, recall) {
            (Some(pr), Some(rc)) if pr + rc > 0.0 => Some(2.0 * pr * rc / (pr + rc)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        if g > 0 {
            ps.push(precision.unwrap_or(0.0));
            rs.push(recall.unwrap_or(0.0));
            fs.push(f1.unwrap_or(0.0));
        }
        per_behavior.insert(
            b.clone(),
            Some(Prf { tp, fp: p - tp, fn_: g - tp, precision, recall, f1 }),
        );
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Evaluation {
        per_behavior,
        macro_precision: mean(&ps),
        macro_recall: mean(&rs),
        macro_f1: mean(&fs),
    }
}

/// Machine-readable output of the `report` stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub apps: Vec<AppReport>,
    pub rating_breakdown: RatingBreakdown,
    pub reaction_times: Vec<ReactionTime>,
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<32} {:<14} {:>8}  behaviors", "app", "market", "score");
        for a in &self.apps {
            let behaviors: Vec<String> = a
                .per_behavior_counts
                .iter()
                .map(|(b, n)| {
                    let tag = match &a.undeclared_hits {
                        Some(u) if u.contains(b) => "*",
                        _ => "",
                    };
                    format!("{b}{tag}={n}")
                })
                .collect();
            let _ = writeln!(s, "{:<32} {:<14} {:>8.3}  {}", a.app_id, a.market, a.violation_score, behaviors.join(" "));
        }
        let _ = writeln!(s, "(* = not covered by the market's published policy)");
        let _ = writeln!(s);
        let _ = writeln!(s, "star  total  matched  fraction");
        for r in &self.rating_breakdown.rows {
            let f = r.fraction.map_or("-".to_string(), |f| format!("{:.4}", f));
            let _ = writeln!(s, "{:>4}  {:>5}  {:>7}  {:>8}", r.star, r.total, r.matched, f);
        }
        let timed: Vec<&ReactionTime> = self.reaction_times.iter().filter(|r| r.days.is_some()).collect();
        if !timed.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "reaction time (days from first matched comment to removal)");
            for r in timed {
                let _ = writeln!(s, "{:<32} {:<14} {:>6}", r.app_id, r.market, r.days.unwrap_or_default());
            }
        }
        s
    }
}

pub fn rating_breakdown_csv(b: &RatingBreakdown) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["star", "total", "matched", "fraction"])?;
    for r in &b.rows {
        w.write_record([
            r.star.to_string(),
            r.total.to_string(),
            r.matched.to_string(),
            r.fraction.map_or(String::new(), |f| format!("{f:.6}")),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf8 csv"))
}

pub fn evaluation_csv(e: &Evaluation) -> Result<String, ReportError> {
    let fmt = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.6}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["behavior", "tp", "fp", "fn", "precision", "recall", "f1"])?;
    for (b, row) in &e.per_behavior {
        match row {
            Some(r) => w.write_record([
                b.to_string(),
                r.tp.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
                fmt(r.precision),
                fmt(r.recall),
                fmt(r.f1),
            ])?,
            None => w.write_record([b.as_str(), "0", "0", "0", "NA", "NA", "NA"])?,
        }
    }
    w.write_record(["macro", "", "", "", &fmt(e.macro_precision), &fmt(e.macro_recall), &fmt(e.macro_f1)])?;
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf8 csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_policy_matrix;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn rec(id: &str, app: &str, market: &str, behavior: &str, date: Option<&str>) -> MatchRecord {
        MatchRecord {
            comment_id: id.into(),
            app_id: app.into(),
            market: market.into(),
            behavior: behavior.into(),
            rule_refs: vec!["{r, null, null}".into()],
            rating: 1,
            posted_at: date.map(|d| d.parse().unwrap()),
        }
    }

    fn comment(id: &str, rating: u8, text: &str) -> Comment {
        Comment {
            id: id.into(),
            app_id: "app".into(),
            market: "vivo".into(),
            lang: "en".into(),
            rating,
            text: text.into(),
            posted_at: None,
        }
    }

    #[test]
    fn empty_app_scores_zero() {
        let r = score_app("a", "vivo", &[], &CategoryWeights::default(), load_policy_matrix());
        assert_eq!(r.violation_score, 0.0);
        assert!(r.declared_hits.unwrap().is_empty());
        assert!(r.undeclared_hits.unwrap().is_empty());
    }

    #[test]
    fn one_security_match_unit_weights() {
        let m = rec("c", "a", "vivo", "virus", None);
        let r = score_app("a", "vivo", &[&m], &CategoryWeights::uniform(1.0), load_policy_matrix());
        assert!((r.violation_score - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn oppo_fail_to_install_is_undeclared() {
        let ms = [rec("1", "a", "Oppo Market", "fail_to_install", None), rec("2", "a", "oppo", "fail_to_install", None)];
        let reports = app_reports(&ms, &CategoryWeights::default(), load_policy_matrix());
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert!(r.declared_hits.as_ref().unwrap().is_empty());
        assert_eq!(r.undeclared_hits.as_ref().unwrap().len(), 1);
        assert_eq!(r.per_behavior_counts[&BehaviorId::from("fail_to_install")], 2);
    }

    #[test]
    fn unknown_market_omits_split() {
        let m = rec("c", "a", "Nowhere Store", "virus", None);
        let r = score_app("a", "nowherestore", &[&m], &CategoryWeights::default(), load_policy_matrix());
        assert!(r.violation_score > 0.0);
        assert!(r.declared_hits.is_none());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn top_comments_are_latest_per_rule_capped() {
        let mut ms = Vec::new();
        for i in 0..8 {
            let mut m = rec(&format!("c{i}"), "a", "vivo", "virus", Some(&format!("2019-01-0{}", i + 1)));
            m.rule_refs = vec![format!("r{i}")];
            ms.push(m);
        }
        let refs: Vec<&MatchRecord> = ms.iter().collect();
        let r = score_app("a", "vivo", &refs, &CategoryWeights::default(), load_policy_matrix());
        assert_eq!(r.top_comments[&BehaviorId::from("virus")], ["c7", "c6", "c5", "c4", "c3"]);
    }

    #[test]
    fn rating_counts() {
        let mut comments: Vec<Comment> = (0..10).map(|i| comment(&format!("c{i}"), 1, "text")).collect();
        let matches = vec![rec("c0", "app", "vivo", "virus", None), rec("c1", "app", "vivo", "virus", None)];
        let b = rating_breakdown(&comments, &matches, false);
        assert_eq!(b.rows[0], StarRow { star: 1, total: 10, matched: 2, fraction: Some(0.2) });
        assert_eq!(b.rows[4].fraction, None);
        for c in comments.iter_mut().skip(5) {
            c.text = "  ".into();
        }
        assert_eq!(rating_breakdown(&comments, &matches, true).rows[0].total, 5);
    }

    #[test]
    fn all_matched_is_one() {
        let comments = [comment("a", 2, "x"), comment("b", 5, "y")];
        let matches = [rec("a", "app", "vivo", "virus", None), rec("b", "app", "vivo", "virus", None)];
        let b = rating_breakdown(&comments, &matches, false);
        assert_eq!(b.rows[1].fraction, Some(1.0));
        assert_eq!(b.rows[4].fraction, Some(1.0));
    }

    fn app(removed: Option<&str>) -> AppRecord {
        AppRecord {
            app_id: "a".into(),
            market: "vivo".into(),
            removed_at: removed.map(|d| d.parse().unwrap()),
        }
    }

    #[test]
    fn reaction_time_cases() {
        let ms = [
            rec("1", "a", "Vivo", "virus", Some("2017-01-05")),
            rec("2", "a", "vivo", "virus", Some("2017-01-01")),
            rec("3", "a", "xiaomi", "virus", Some("2016-01-01")),
        ];
        assert_eq!(reaction_time(&app(Some("2017-01-31")), &ms), Some(30));
        assert_eq!(reaction_time(&app(Some("2017-01-01")), &ms), Some(0));
        assert_eq!(reaction_time(&app(None), &ms), None);
        assert_eq!(reaction_time(&app(Some("2017-01-31")), &[rec("1", "a", "vivo", "virus", None)]), None);
        let expect = (NaiveDate::from_ymd_opt(2017, 1, 31).unwrap() - NaiveDate::from_ymd_opt(2017, 1, 1).unwrap()).num_days();
        assert_eq!(expect, 30);
    }

    fn labeled() -> LabeledCorpus {
        let mut c = LabeledCorpus::new("en");
        c.push("virus".into(), "v1", "this app is a virus");
        c.push("fail_to_install".into(), "f1", "cannot install it at all");
        c
    }

    #[test]
    fn baseline_self_similarity_and_empty() {
        let p = TextPipeline::default();
        let b = SimilarityBaseline::fit(&labeled(), &p).unwrap();
        assert_eq!(b.classify("this app is a virus", &p), Some("virus".into()));
        assert_eq!(b.classify("zzz qqq", &p), None);
        assert_eq!(b.classify("", &p), None);
        assert!(SimilarityBaseline::fit(&LabeledCorpus::new("en"), &p).is_err());
    }

    #[test]
    fn evaluation_examples() {
        let ids = |n: usize, pre: &str, b: &str| -> Vec<(String, BehaviorId)> {
            (0..n).map(|i| (format!("{pre}{i}"), b.into())).collect()
        };
        let mut gold = ids(10, "g", "virus");
        let mut pred = ids(9, "g", "virus");
        pred.push(("x".into(), "virus".into()));
        gold.push(("z".into(), "hidden_app".into()));
        let behaviors: Vec<BehaviorId> = vec!["virus".into(), "hidden_app".into(), "powerboot".into()];
        let e = evaluate(&pred, &gold, &behaviors);
        let v = e.per_behavior[&BehaviorId::from("virus")].clone().unwrap();
        assert_eq!((v.tp, v.fp, v.fn_), (9, 1, 1));
        assert!((v.precision.unwrap() - 0.9).abs() < 1e-12);
        assert!((v.recall.unwrap() - 0.9).abs() < 1e-12);
        assert!((v.f1.unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(e.per_behavior[&BehaviorId::from("powerboot")], None);
        let h = e.per_behavior[&BehaviorId::from("hidden_app")].clone().unwrap();
        assert_eq!(h.precision, Some(0.0));
        let perfect = evaluate(&gold, &gold, &behaviors);
        assert_eq!(perfect.macro_f1, Some(1.0));
        assert!(evaluation_csv(&e).unwrap().contains("powerboot,0,0,0,NA,NA,NA"));
    }

    #[test]
    fn csv_has_header_and_five_rows() {
        let b = rating_breakdown(&[comment("a", 3, "x")], &[], false);
        let csv = rating_breakdown_csv(&b).unwrap();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.contains("3,1,0,0.000000"));
    }

    fn counts() -> impl Strategy<Value = BTreeMap<BehaviorId, usize>> {
        let ids: Vec<String> = load_taxonomy().behaviors().iter().map(|b| b.id.to_string()).collect();
        prop::collection::btree_map(prop::sample::select(ids).prop_map(BehaviorId::new), 0usize..50, 0..8)
    }

    proptest! {
        #[test]
        fn score_monotone_in_counts(c in counts(), pick in 0usize..8) {
            let w = CategoryWeights::default();
            let base = violation_score(&c, &w);
            if let Some(k) = c.keys().nth(pick % c.len().max(1)).cloned() {
                let mut more = c.clone();
                *more.get_mut(&k).unwrap() += 1;
                prop_assert!(violation_score(&more, &w) >= base);
            }
        }

        #[test]
        fn scaling_weights_preserves_ranking(a in counts(), b in counts(), k in 0.01f64..100.0) {
            let w = CategoryWeights::default();
            let scaled = CategoryWeights(w.0.iter().map(|(c, x)| (*c, x * k)).collect());
            let before = violation_score(&a, &w).partial_cmp(&violation_score(&b, &w)).unwrap();
            let after = violation_score(&a, &scaled).partial_cmp(&violation_score(&b, &scaled)).unwrap();
            let (sa, sb) = (violation_score(&a, &w), violation_score(&b, &w));
            if (sa - sb).abs() > 1e-9 * (1.0 + sa.abs() + sb.abs()) {
                prop_assert_eq!(before, after);
            }
        }

        #[test]
        fn f1_is_harmonic_mean(tp in 0usize..20, fp in 0usize..20, fn_ in 0usize..20) {
            let b: BehaviorId = "virus".into();
            let mut pred: Vec<(String, BehaviorId)> = (0..tp).map(|i| (format!("t{i}"), b.clone())).collect();
            pred.extend((0..fp).map(|i| (format!("f{i}"), b.clone())));
            let mut gold: Vec<(String, BehaviorId)> = (0..tp).map(|i| (format!("t{i}"), b.clone())).collect();
            gold.extend((0..fn_).map(|i| (format!("n{i}"), b.clone())));
            let e = evaluate(&pred, &gold, std::slice::from_ref(&b));
            if let Some(Some(r)) = e.per_behavior.get(&b) {
                if let (Some(p), Some(rc), Some(f)) = (r.precision, r.recall, r.f1) {
                    if p + rc > 0.0 {
                        prop_assert!((f - 2.0 * p * rc / (p + rc)).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn breakdown_fractions_recompute(ratings in prop::collection::vec((1u8..=5, any::<bool>(), any::<bool>()), 0..40)) {
            let comments: Vec<Comment> = ratings.iter().enumerate()
                .map(|(i, (r, blank, _))| comment(&i.to_string(), *r, if *blank { "" } else { "t" })).collect();
            let matches: Vec<MatchRecord> = ratings.iter().enumerate().filter(|(_, x)| x.2)
                .map(|(i, _)| rec(&i.to_string(), "app", "vivo", "virus", None)).collect();
            let all = rating_breakdown(&comments, &matches, false);
            let nonblank = rating_breakdown(&comments, &matches, true);
            for (a, n) in all.rows.iter().zip(&nonblank.rows) {
                prop_assert!(a.matched <= a.total);
                prop_assert!(n.total <= a.total);
                if let Some(f) = a.fraction {
                    prop_assert_eq!(f, a.matched as f64 / a.total as f64);
                }
            }
        }
    }
}
