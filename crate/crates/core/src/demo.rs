//! Bundled demo inputs and a seeded template generator for synthetic,
//! gold-labeled comment corpora.

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use thiserror::Error;

use crate::btm::BtmConfig;
use crate::corpus::{parse_comments, parse_policies, AppRecord, BehaviorId, Comment, PolicyDocument};
use crate::labeler::{label_topics, propose_candidates, train_on_policies, LabelError, DEFAULT_THRESHOLD};
use crate::matcher::{classify_stream, MatchError, MatchRecord, RuleSet, SemanticRule};
use crate::report::{evaluate, Evaluation};
use crate::rulegen::{extract_rules, RuleGenConfig, RuleGenError};
use crate::textprep::{PosLexicon, TextPipeline};
use crate::triage::{TriageError, TriageStore, Verdict};

const POLICIES_EN: &str = include_str!("../data/demo/policies_en.jsonl");
const MOTIVATING_COMMENTS: &str = include_str!("../data/demo/motivating_comments.jsonl");

pub fn demo_policies() -> Vec<PolicyDocument> {
    parse_policies(POLICIES_EN, "demo/policies_en.jsonl").expect("bundled policies are valid")
}

/// The two example comments from the motivating figure plus a neutral one.
pub fn motivating_comments() -> Vec<Comment> {
    let parsed = parse_comments(MOTIVATING_COMMENTS);
    assert!(parsed.errors.is_empty(), "bundled comments are valid");
    parsed.records
}

const APP: &[&str] = &["this app", "the game", "it", "this thing", "the app"];
const TAIL: &[&str] = &["", "", "please fix", "very disappointed", "one star", "waste of time", "so annoying"];

const TEMPLATES: &[(&str, &[&str])] = &[
    (
        "fail_to_install",
        &[
            "installation failed {t}",
            "installation error, setup never finishes",
            "{a} installation never finishes",
            "installation stuck at ninety percent {t}",
            "setup error during installation",
        ],
    ),
    (
        "fail_to_uninstall",
        &[
            "removal of {a} is impossible",
            "{a} blocks removal from settings {t}",
            "no uninstall option, removal impossible",
            "removal keeps failing {t}",
            "tried removal in settings and {a} is still there",
        ],
    ),
    (
        "ad_disruption",
        &[
            "too many popup ads {t}",
            "a popup after every level",
            "popup ads every few seconds {t}",
            "a popup in the middle of the level",
            "each popup ad covers the level",
        ],
    ),
    (
        "ads_in_notification_bar",
        &[
            "the notification bar is full of ads",
            "ads keep showing in my notification bar",
            "spam in the notification bar all day {t}",
            "{a} pushes ads to the notification bar",
            "notification bar spam all day",
        ],
    ),
    (
        "virus",
        &[
            "{a} is a virus",
            "my antivirus found a virus in {a}",
            "virus inside {a} {t}",
            "antivirus warning, a virus right after download",
            "this is a virus, antivirus says so",
        ],
    ),
    (
        "permission_abuse",
        &[
            "{a} asks for permission to read my contacts",
            "wants permission for my contacts and location {t}",
            "camera permission for no reason",
            "{a} requests permission to read sms",
            "permission requests for contacts {t}",
        ],
    ),
    (
        "payment_deception",
        &[
            "{a} steals money from my card",
            "took money from my card without asking {t}",
            "money disappears from my card",
            "a hidden fee took my money",
            "lost money to a hidden fee {t}",
        ],
    ),
];

const NEUTRAL: &[&str] = &[
    "great app, love it",
    "works fine on my phone",
    "easy to install and use",
    "nice design and smooth performance",
    "the new update looks good",
    "five stars, very useful",
    "best game i have played this year",
    "good app but the notification sound is loud",
    "simple and fast, {t}",
    "i use {a} every day",
];

/// Behaviors covered by the synthetic generator, in template order.
pub fn synthetic_behaviors() -> Vec<BehaviorId> {
    TEMPLATES.iter().map(|(b, _)| BehaviorId::new(*b)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldComment {
    pub comment: Comment,
    pub gold: Option<BehaviorId>,
}

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    let a = APP.choose(rng).expect("non-empty");
    let t = TAIL.choose(rng).expect("non-empty");
    let s = template.replace("{a}", a).replace("{t}", t);
    s.trim_end_matches([' ', ',']).to_string()
}

/// `per_behavior` comments for each template behavior plus `neutral`
/// unlabeled ones, shuffled. Identical arguments give identical output.
pub fn synthetic_corpus(seed: u64, per_behavior: usize, neutral: usize) -> Vec<GoldComment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let markets = ["Google Play", "Xiaomi", "Vivo", "Oppo Market", "Huawei"];
    let start = NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date");
    let mut out = Vec::new();
    let mut push = |text: String, gold: Option<BehaviorId>, rng: &mut ChaCha8Rng| {
        let app = rng.gen_range(0..12);
        let rating = if gold.is_some() { rng.gen_range(1..=2) } else { rng.gen_range(3..=5) };
        out.push(GoldComment {
            comment: Comment {
                id: String::new(),
                app_id: format!("com.demo.app{app:02}"),
                market: markets[app % markets.len()].to_string(),
                lang: "en".to_string(),
                rating,
                text,
                posted_at: Some(start + Duration::days(rng.gen_range(0..365))),
            },
            gold,
        });
    };
    for (behavior, templates) in TEMPLATES {
        for i in 0..per_behavior {
            let text = fill(templates[i % templates.len()], &mut rng);
            push(text, Some(BehaviorId::new(*behavior)), &mut rng);
        }
    }
    for i in 0..neutral {
        let text = fill(NEUTRAL[i % NEUTRAL.len()], &mut rng);
        push(text, None, &mut rng);
    }
    out.shuffle(&mut rng);
    for (i, g) in out.iter_mut().enumerate() {
        g.comment.id = format!("syn-{i:04}");
    }
    out
}

/// Deterministic split: the first `round(len * holdout)` items after a
/// seeded shuffle are held out.
pub fn holdout_split<T: Clone>(items: &[T], holdout: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (items.len() as f64 * holdout).round() as usize;
    let (test, train) = idx.split_at(n_test);
    let pick = |ix: &[usize]| {
        let mut ix = ix.to_vec();
        ix.sort_unstable();
        ix.into_iter().map(|i| items[i].clone()).collect::<Vec<_>>()
    };
    (pick(train), pick(test))
}

/// App records for the demo corpus; two apps carry removal dates.
pub fn demo_apps(corpus: &[GoldComment]) -> Vec<AppRecord> {
    let mut apps: Vec<AppRecord> = Vec::new();
    for g in corpus {
        if !apps.iter().any(|a| a.app_id == g.comment.app_id && a.market == g.comment.market) {
            apps.push(AppRecord {
                app_id: g.comment.app_id.clone(),
                market: g.comment.market.clone(),
                removed_at: None,
            });
        }
    }
    apps.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    let end = NaiveDate::from_ymd_opt(2020, 2, 1);
    for a in apps.iter_mut().take(2) {
        a.removed_at = end;
    }
    apps
}

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Triage(#[from] TriageError),
    #[error(transparent)]
    RuleGen(#[from] RuleGenError),
    #[error(transparent)]
    Match(#[from] MatchError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub per_behavior: usize,
    pub neutral: usize,
    pub holdout: f64,
    pub iterations: usize,
    pub threshold: f64,
    pub rules: RuleGenConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 11,
            per_behavior: 50,
            neutral: 50,
            holdout: 0.3,
            iterations: 1000,
            threshold: DEFAULT_THRESHOLD,
            rules: RuleGenConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub corpus: Vec<GoldComment>,
    pub test_ids: Vec<String>,
    pub matches: Vec<MatchRecord>,
    pub corpus_size: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub candidates: usize,
    pub confirmed: usize,
    pub rules: Vec<SemanticRule>,
    pub behaviors: Vec<BehaviorId>,
    pub evaluation: Evaluation,
}

/// Full pipeline on a synthetic corpus. Triage is simulated: a candidate
/// is confirmed exactly when it agrees with the gold label.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkOutcome, BenchmarkError> {
    let corpus = synthetic_corpus(config.seed, config.per_behavior, config.neutral);
    let (train, test) = holdout_split(&corpus, config.holdout, config.seed);
    let pipeline = TextPipeline::default();
    let policies = demo_policies();
    let btm = BtmConfig {
        k: policies.len(),
        iterations: config.iterations,
        seed: config.seed,
        ..BtmConfig::default()
    };
    let model = train_on_policies(&policies, &pipeline, &btm)?;
    let labeling = label_topics(&model, &policies, &pipeline)?;

    let comments: Vec<Comment> = train.iter().map(|g| g.comment.clone()).collect();
    let candidates = propose_candidates(&model, &labeling, &comments, &pipeline, config.threshold)?;
    let mut store = TriageStore::in_memory();
    store.enqueue(&candidates, &comments)?;
    let pending: Vec<(u64, String, BehaviorId)> = store
        .items()
        .iter()
        .map(|it| (it.item_id, it.candidate.comment_id.clone(), it.candidate.behavior.clone()))
        .collect();
    let mut confirmed = 0;
    for (item_id, comment_id, behavior) in pending {
        let gold = train.iter().find(|g| g.comment.id == comment_id).and_then(|g| g.gold.as_ref());
        let verdict = if gold == Some(&behavior) {
            confirmed += 1;
            Verdict::Confirm
        } else {
            Verdict::Reject
        };
        store.decide(item_id, verdict, Vec::new(), None)?;
    }

    let labeled = store.export_labeled_corpus("en");
    let extraction = extract_rules(&labeled, &policies, &pipeline, &PosLexicon::english(), &config.rules)?;
    let ruleset = RuleSet::new(extraction.rules.clone())?;
    let test_comments: Vec<Comment> = test.iter().map(|g| g.comment.clone()).collect();
    let output = classify_stream(&test_comments, &ruleset, &pipeline);
    let predictions: Vec<(String, BehaviorId)> = output
        .records
        .iter()
        .map(|r| (r.comment_id.clone(), r.behavior.clone()))
        .collect();
    let gold: Vec<(String, BehaviorId)> = test
        .iter()
        .filter_map(|g| g.gold.clone().map(|b| (g.comment.id.clone(), b)))
        .collect();
    let behaviors = synthetic_behaviors();
    Ok(BenchmarkOutcome {
        test_ids: test.iter().map(|g| g.comment.id.clone()).collect(),
        matches: output.records,
        corpus_size: corpus.len(),
        train_size: train.len(),
        test_size: test.len(),
        candidates: candidates.len(),
        confirmed,
        rules: extraction.rules,
        evaluation: evaluate(&predictions, &gold, &behaviors),
        behaviors,
        corpus,
    })
}
