use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use policywatch::btm::BtmModel;
use policywatch::config::PipelineConfig;
use policywatch::corpus::{
    check_removal_dates, load_policy_matrix, parse_apps, parse_comments, parse_policies, serialize_comments,
    to_json_lines, AppRecord, BehaviorId, Comment, Ingested, PolicyDocument,
};
use policywatch::demo::{demo_apps, run_benchmark, BenchmarkConfig};
use policywatch::labeler::{label_topics, propose_candidates, train_on_policies, CandidateLabel, CandidateRecord, TopicLabeling};
use policywatch::matcher::{bundled_rules, classify_stream, parse_matches, parse_rules, serialize_rules, MatchRecord, RuleSet};
use policywatch::report::{
    app_reports, evaluate, evaluation_csv, rating_breakdown, rating_breakdown_csv, reaction_times, ReportDocument,
};
use policywatch::rulegen::extract_rules;
use policywatch::textprep::{PosLexicon, TextPipeline};
use policywatch::triage::{Clock, LabeledCorpus, TriageStore};
use policywatch_triage::DecisionRequest;

use crate::io::{input, read_text, require, usage, write_or_stdout, write_text, CliResult, Tag};
use crate::{
    Cli, Command, DemoArgs, EvaluateArgs, ExtractArgs, IngestArgs, LabelArgs, MatchArgs, ProposeArgs, ReportArgs,
    TrainArgs, TriageArgs,
};

/// One line of a gold-label file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub comment_id: String,
    pub behavior: BehaviorId,
}

struct Ctx {
    cfg: PipelineConfig,
    pipeline: TextPipeline,
}

impl Ctx {
    fn lang(&self) -> &str {
        &self.cfg.lang
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => {
            require(path)?;
            PipelineConfig::load(path).or_input()?
        }
        None => PipelineConfig::default(),
    };
    if let Some(lang) = cli.lang {
        cfg.lang = lang;
    }
    let pipeline = TextPipeline::default();
    if !pipeline.supports(&cfg.lang) {
        return Err(input(format!("language `{}` is not supported", cfg.lang)));
    }
    let ctx = Ctx { cfg, pipeline };
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::TrainBtm(a) => train_btm(&ctx, a),
        Command::LabelTopics(a) => label(&ctx, a),
        Command::Propose(a) => propose(&ctx, a),
        Command::TriageServe(a) => triage_serve(&ctx, a),
        Command::ExtractRules(a) => extract(&ctx, a),
        Command::Match(a) => run_match(&ctx, a),
        Command::Report(a) => report(&ctx, a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Demo(a) => demo(&ctx, a),
    }
}

fn warn_lines<T>(path: &Path, ingested: &Ingested<T>) {
    for e in &ingested.errors {
        log::warn!("{}: {e}", path.display());
    }
}

fn load_comments(path: &Path) -> CliResult<Vec<Comment>> {
    let parsed = parse_comments(&read_text(path)?);
    warn_lines(path, &parsed);
    Ok(parsed.records)
}

fn load_policies(ctx: &Ctx, path: &Path) -> CliResult<Vec<PolicyDocument>> {
    let docs = parse_policies(&read_text(path)?, &path.display().to_string()).or_input()?;
    let docs: Vec<PolicyDocument> = docs.into_iter().filter(|d| d.lang == ctx.lang()).collect();
    if docs.is_empty() {
        return Err(input(format!("{} has no `{}` policy documents", path.display(), ctx.lang())));
    }
    Ok(docs)
}

fn load_apps(path: &Path) -> CliResult<Vec<AppRecord>> {
    let parsed = parse_apps(&read_text(path)?);
    warn_lines(path, &parsed);
    Ok(parsed.records)
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| input(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn pick(flag: Option<PathBuf>, default: &Path) -> PathBuf {
    flag.unwrap_or_else(|| default.to_path_buf())
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> CliResult<()> {
    let path = pick(a.comments, &ctx.cfg.paths.comments);
    let parsed = parse_comments(&read_text(&path)?);
    warn_lines(&path, &parsed);
    if a.strict && !parsed.errors.is_empty() {
        return Err(input(format!("{} rejected lines in {}", parsed.errors.len(), path.display())));
    }
    if let Some(apps_path) = a.apps {
        let mut apps = load_apps(&apps_path)?;
        for w in check_removal_dates(&mut apps, &parsed.records) {
            log::warn!("{w}");
        }
    }
    eprintln!("{} comments accepted, {} rejected", parsed.records.len(), parsed.errors.len());
    write_or_stdout(a.out.as_deref(), &serialize_comments(&parsed.records))
}

fn train_btm(ctx: &Ctx, a: TrainArgs) -> CliResult<()> {
    let policies = load_policies(ctx, &pick(a.policies, &ctx.cfg.paths.policies))?;
    let mut section = ctx.cfg.btm.clone();
    section.k = a.k.or(section.k);
    section.alpha = a.alpha.or(section.alpha);
    section.beta = a.beta.unwrap_or(section.beta);
    section.iterations = a.iterations.unwrap_or(section.iterations);
    section.seed = a.seed.unwrap_or(section.seed);
    let btm = section.resolve(policies.len());
    btm.validate().map_err(usage)?;
    let model = train_on_policies(&policies, &ctx.pipeline, &btm).or_input()?;
    let out = pick(a.out, &ctx.cfg.paths.model);
    write_text(&out, &model.to_text())?;
    eprintln!(
        "trained {} topics over {} words from {} policy documents",
        model.num_topics(),
        model.vocab().len(),
        policies.len()
    );
    Ok(())
}

fn load_model(path: &Path) -> CliResult<BtmModel> {
    BtmModel::from_text(&read_text(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn label(ctx: &Ctx, a: LabelArgs) -> CliResult<()> {
    let model = load_model(&pick(a.model, &ctx.cfg.paths.model))?;
    let policies = load_policies(ctx, &pick(a.policies, &ctx.cfg.paths.policies))?;
    let labeling = label_topics(&model, &policies, &ctx.pipeline).or_input()?;
    for (topic, behavior) in &labeling.assignment {
        let words: Vec<&str> = model.top_words(*topic, 5).into_iter().map(|(w, _)| w).collect();
        eprintln!("topic {topic:>3} -> {behavior} ({})", words.join(", "));
    }
    let json = serde_json::to_string_pretty(&labeling).or_internal()? + "\n";
    write_text(&pick(a.out, &ctx.cfg.paths.labeling), &json)
}

fn propose(ctx: &Ctx, a: ProposeArgs) -> CliResult<()> {
    let model = load_model(&pick(a.model, &ctx.cfg.paths.model))?;
    let labeling: TopicLabeling = load_json(&pick(a.labeling, &ctx.cfg.paths.labeling))?;
    let comments = load_comments(&pick(a.comments, &ctx.cfg.paths.comments))?;
    let threshold = a.threshold.unwrap_or(ctx.cfg.labeling.threshold);
    let candidates = propose_candidates(&model, &labeling, &comments, &ctx.pipeline, threshold).map_err(usage)?;
    let text_of = |id: &str| {
        comments
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.text.clone())
            .unwrap_or_default()
    };
    let records: Vec<CandidateRecord> = candidates
        .iter()
        .map(|c| CandidateRecord {
            comment_id: c.comment_id.clone(),
            behavior: c.behavior.clone(),
            probability: c.probability,
            comment_text: text_of(&c.comment_id),
        })
        .collect();
    eprintln!("{} candidates for {} comments at threshold {threshold}", records.len(), comments.len());
    write_text(&pick(a.out, &ctx.cfg.paths.candidates), &to_json_lines(&records))
}

fn parse_time(raw: &str) -> CliResult<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| usage(format!("invalid --fixed-time `{raw}`: {e}")))
}

fn triage_serve(ctx: &Ctx, a: TriageArgs) -> CliResult<()> {
    let dir = pick(a.dir, &ctx.cfg.paths.triage_dir);
    let fixed = match a.fixed_time.as_deref() {
        Some(raw) => Some(parse_time(raw)?),
        None => ctx.cfg.triage.fixed_time,
    };
    let clock = fixed.map_or(Clock::System, Clock::Fixed);
    let mut store = TriageStore::open(&dir).or_input()?.with_clock(clock);

    if let Some(path) = a.candidates {
        let records: Vec<CandidateRecord> = load_jsonl(&path)?;
        let comments_path = pick(a.comments, &ctx.cfg.paths.comments);
        let comments = load_comments(&comments_path)?;
        let labels: Vec<CandidateLabel> = records
            .into_iter()
            .map(|r| CandidateLabel {
                comment_id: r.comment_id,
                behavior: r.behavior,
                probability: r.probability,
            })
            .collect();
        let rep = store.enqueue(&labels, &comments).or_input()?;
        for e in &rep.errors {
            log::warn!("{e}");
        }
        eprintln!("enqueued {} candidates ({} already queued)", rep.added, rep.duplicates);
    }
    if let Some(path) = a.apply {
        let decisions: Vec<DecisionRequest> = load_jsonl(&path)?;
        for d in decisions {
            let id = d.item_id;
            store
                .decide(id, d.verdict, d.segments, d.reviewer)
                .map_err(|e| input(format!("{}: item {id}: {e}", path.display())))?;
        }
    }
    store.write_snapshot().or_input()?;
    let progress = store.progress();
    let counts: Vec<String> = progress
        .by_status
        .iter()
        .map(|(s, n)| format!("{}={n}", s.as_str()))
        .collect();
    eprintln!("store {}: {}", dir.display(), counts.join(" "));
    if a.enqueue_only {
        return Ok(());
    }

    let port = a.port.unwrap_or(ctx.cfg.triage.port);
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let runtime = tokio::runtime::Runtime::new().or_internal()?;
    let shared = policywatch_triage::shared(store);
    eprintln!("serving triage API on http://{addr} (Ctrl-C to stop)");
    runtime
        .block_on(policywatch_triage::serve(shared, addr, async {
            let _ = tokio::signal::ctrl_c().await;
        }))
        .map_err(|e| input(format!("cannot serve on {addr}: {e}")))
}

fn extract(ctx: &Ctx, a: ExtractArgs) -> CliResult<()> {
    let labeled: LabeledCorpus = match (a.labeled, a.store) {
        (_, Some(dir)) => {
            require(&dir)?;
            TriageStore::open(&dir).or_input()?.export_labeled_corpus(ctx.lang())
        }
        (flag, None) => load_json(&pick(flag, &ctx.cfg.paths.labeled))?,
    };
    let policies = if a.no_policies {
        Vec::new()
    } else {
        match a.policies {
            Some(p) => load_policies(ctx, &p)?,
            None if ctx.cfg.paths.policies.exists() => load_policies(ctx, &ctx.cfg.paths.policies)?,
            None => Vec::new(),
        }
    };
    let mut rules_cfg = ctx.cfg.rules.clone();
    rules_cfg.max_distance = a.max_distance.unwrap_or(rules_cfg.max_distance);
    rules_cfg.min_f1 = a.min_f1.unwrap_or(rules_cfg.min_f1);
    rules_cfg.validate().map_err(usage)?;
    let extraction = extract_rules(&labeled, &policies, &ctx.pipeline, &PosLexicon::english(), &rules_cfg).or_input()?;
    for s in &extraction.behaviors {
        eprintln!("{:<32} {:>5} comments  kept {:>3}  dropped {:>3}", s.behavior.as_str(), s.comments, s.kept, s.dropped);
    }
    if let Some(path) = a.summary {
        let json = serde_json::to_string_pretty(&extraction.behaviors).or_internal()? + "\n";
        write_text(&path, &json)?;
    }
    write_text(&pick(a.out, &ctx.cfg.paths.rules), &serialize_rules(&extraction.rules))
}

fn run_match(ctx: &Ctx, a: MatchArgs) -> CliResult<()> {
    let rules = if a.bundled_rules {
        bundled_rules()
    } else {
        let path = pick(a.rules, &ctx.cfg.paths.rules);
        parse_rules(&read_text(&path)?).map_err(|e| input(format!("{}: {e}", path.display())))?
    };
    let ruleset = RuleSet::new(rules).or_input()?;
    let comments = load_comments(&pick(a.comments, &ctx.cfg.paths.comments))?;
    let output = classify_stream(&comments, &ruleset, &ctx.pipeline);
    for f in &output.failures {
        log::warn!("comment {}: {}", f.comment_id, f.message);
    }
    let s = &output.summary;
    eprintln!(
        "rule set {} ({} rules): {} of {} comments matched, {} unsupported",
        &ruleset.version()[..12],
        ruleset.len(),
        s.matched_comments,
        s.comments,
        s.unsupported
    );
    for (b, n) in &s.per_behavior {
        eprintln!("  {b}: {n}");
    }
    write_text(&pick(a.out, &ctx.cfg.paths.matches), &to_json_lines(&output.records))
}

fn load_matches(path: &Path) -> CliResult<Vec<MatchRecord>> {
    parse_matches(&read_text(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn build_report(
    comments: &[Comment],
    matches: &[MatchRecord],
    apps: &mut [AppRecord],
    cfg: &PipelineConfig,
    exclude_blank: bool,
) -> ReportDocument {
    for w in check_removal_dates(apps, comments) {
        log::warn!("{w}");
    }
    ReportDocument {
        apps: app_reports(matches, &cfg.report.weights, load_policy_matrix()),
        rating_breakdown: rating_breakdown(comments, matches, exclude_blank),
        reaction_times: reaction_times(apps, matches),
    }
}

fn report(ctx: &Ctx, a: ReportArgs) -> CliResult<()> {
    let matches = load_matches(&pick(a.matches, &ctx.cfg.paths.matches))?;
    let comments = load_comments(&pick(a.comments, &ctx.cfg.paths.comments))?;
    let mut apps = match a.apps {
        Some(p) => load_apps(&p)?,
        None if ctx.cfg.paths.apps.exists() => load_apps(&ctx.cfg.paths.apps)?,
        None => Vec::new(),
    };
    let exclude_blank = a.exclude_blank || ctx.cfg.report.exclude_blank;
    let doc = build_report(&comments, &matches, &mut apps, &ctx.cfg, exclude_blank);
    if let Some(path) = a.ratings_csv {
        write_text(&path, &rating_breakdown_csv(&doc.rating_breakdown).or_internal()?)?;
    }
    write_text(&pick(a.out, &ctx.cfg.paths.report), &doc.to_json())?;
    print!("{}", doc.summary());
    Ok(())
}

fn run_evaluate(a: EvaluateArgs) -> CliResult<()> {
    let predictions: Vec<(String, BehaviorId)> = load_matches(&a.predictions)?
        .into_iter()
        .map(|m| (m.comment_id, m.behavior))
        .collect();
    let gold: Vec<(String, BehaviorId)> = load_jsonl::<GoldRecord>(&a.gold)?
        .into_iter()
        .map(|g| (g.comment_id, g.behavior))
        .collect();
    let behaviors: Vec<BehaviorId> = predictions
        .iter()
        .chain(&gold)
        .map(|(_, b)| b.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let e = evaluate(&predictions, &gold, &behaviors);
    write_or_stdout(a.out.as_deref(), &evaluation_csv(&e).or_internal()?)
}

fn demo(ctx: &Ctx, a: DemoArgs) -> CliResult<()> {
    let cfg = BenchmarkConfig {
        seed: a.seed,
        per_behavior: a.per_behavior,
        neutral: a.neutral,
        rules: ctx.cfg.rules.clone(),
        threshold: ctx.cfg.labeling.threshold,
        ..BenchmarkConfig::default()
    };
    let out = run_benchmark(&cfg).or_internal()?;
    let csv = evaluation_csv(&out.evaluation).or_internal()?;
    eprintln!(
        "{} comments ({} train, {} held out); {} candidates, {} confirmed; {} rules",
        out.corpus_size,
        out.train_size,
        out.test_size,
        out.candidates,
        out.confirmed,
        out.rules.len()
    );
    if let Some(dir) = a.out {
        let comments: Vec<Comment> = out.corpus.iter().map(|g| g.comment.clone()).collect();
        let test: BTreeSet<&str> = out.test_ids.iter().map(String::as_str).collect();
        let gold: Vec<GoldRecord> = out
            .corpus
            .iter()
            .filter(|g| test.contains(g.comment.id.as_str()))
            .filter_map(|g| {
                g.gold.clone().map(|behavior| GoldRecord {
                    comment_id: g.comment.id.clone(),
                    behavior,
                })
            })
            .collect();
        let held_out: Vec<Comment> = comments.iter().filter(|c| test.contains(c.id.as_str())).cloned().collect();
        let mut apps = demo_apps(&out.corpus);
        let doc = build_report(&held_out, &out.matches, &mut apps, &ctx.cfg, false);
        write_text(&dir.join("comments.jsonl"), &serialize_comments(&comments))?;
        write_text(&dir.join("gold.jsonl"), &to_json_lines(&gold))?;
        write_text(&dir.join("apps.jsonl"), &to_json_lines(&apps))?;
        write_text(&dir.join("policies.jsonl"), &to_json_lines(&policywatch::demo::demo_policies()))?;
        write_text(&dir.join("rules.jsonl"), &serialize_rules(&out.rules))?;
        write_text(&dir.join("matches.jsonl"), &to_json_lines(&out.matches))?;
        write_text(&dir.join("evaluation.csv"), &csv)?;
        write_text(&dir.join("report.json"), &doc.to_json())?;
    }
    print!("{csv}");
    Ok(())
}
