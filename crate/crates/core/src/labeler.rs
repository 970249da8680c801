//! Topic-to-behavior labeling and threshold-based candidate proposal.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::btm::{train_on_documents, BtmConfig, BtmError, BtmModel, DocTopics};
use crate::corpus::{BehaviorId, Comment, PolicyDocument};
use crate::textprep::{TextError, TextPipeline};

pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("policy document for `{0}` has no in-vocabulary biterms")]
    UndecidablePolicy(BehaviorId),
    #[error("{policies} policy documents but only {topics} topics")]
    TooManyPolicies { policies: usize, topics: usize },
    #[error("threshold must lie strictly between 0 and 1, got {0}")]
    Threshold(f64),
    #[error("no policy documents to train on")]
    NoPolicies,
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Btm(#[from] BtmError),
}

/// Topic index -> behavior, with the `P(z|d)` that won each assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicLabeling {
    pub assignment: BTreeMap<usize, BehaviorId>,
    pub scores: BTreeMap<usize, f64>,
}

impl TopicLabeling {
    pub fn behavior_of(&self, topic: usize) -> Option<&BehaviorId> {
        self.assignment.get(&topic)
    }

    pub fn topic_of(&self, behavior: &BehaviorId) -> Option<usize> {
        self.assignment
            .iter()
            .find(|(_, b)| *b == behavior)
            .map(|(&t, _)| t)
    }
}

/// Learns topics from the policy texts alone.
pub fn train_on_policies(
    policies: &[PolicyDocument],
    pipeline: &TextPipeline,
    config: &BtmConfig,
) -> Result<BtmModel, LabelError> {
    if policies.is_empty() {
        return Err(LabelError::NoPolicies);
    }
    let docs = policies
        .iter()
        .map(|d| pipeline.process(&d.text, &d.lang))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(train_on_documents(&docs, config)?)
}

/// Greedy injective labeling: score every (topic, policy) pair by
/// `P(z|d)`, then repeatedly take the best pair whose topic and behavior
/// are both still free. Ties go to the lower topic index, then the
/// lexicographically smaller behavior id, so input order does not matter.
pub fn label_topics(
    model: &BtmModel,
    policies: &[PolicyDocument],
    pipeline: &TextPipeline,
) -> Result<TopicLabeling, LabelError> {
    if policies.len() > model.num_topics() {
        return Err(LabelError::TooManyPolicies {
            policies: policies.len(),
            topics: model.num_topics(),
        });
    }
    let mut pairs: Vec<(f64, usize, &BehaviorId)> = Vec::new();
    for doc in policies {
        let tokens = pipeline.process(&doc.text, &doc.lang)?;
        let DocTopics::Distribution(dist) = model.topic_given_doc(&tokens) else {
            return Err(LabelError::UndecidablePolicy(doc.behavior.clone()));
        };
        pairs.extend(dist.into_iter().enumerate().map(|(z, p)| (p, z, &doc.behavior)));
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(b.2))
    });
    let mut labeling = TopicLabeling {
        assignment: BTreeMap::new(),
        scores: BTreeMap::new(),
    };
    let mut used: HashSet<&BehaviorId> = HashSet::new();
    for (score, topic, behavior) in pairs {
        if labeling.assignment.contains_key(&topic) || used.contains(behavior) {
            continue;
        }
        used.insert(behavior);
        labeling.assignment.insert(topic, behavior.clone());
        labeling.scores.insert(topic, score);
    }
    Ok(labeling)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateLabel {
    pub comment_id: String,
    pub behavior: BehaviorId,
    pub probability: f64,
}

/// Record of the candidate export file consumed by triage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub comment_id: String,
    pub behavior: BehaviorId,
    pub probability: f64,
    pub comment_text: String,
}

pub fn validate_threshold(threshold: f64) -> Result<(), LabelError> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(LabelError::Threshold(threshold))
    }
}

/// Candidates for one comment: every labeled topic with `P(z|d) >= threshold`.
/// Undecidable comments and unsupported languages yield nothing.
pub fn candidates_for(
    model: &BtmModel,
    labeling: &TopicLabeling,
    comment: &Comment,
    pipeline: &TextPipeline,
    threshold: f64,
) -> Vec<CandidateLabel> {
    let Ok(tokens) = pipeline.process(&comment.text, &comment.lang) else {
        return Vec::new();
    };
    let DocTopics::Distribution(dist) = model.topic_given_doc(&tokens) else {
        return Vec::new();
    };
    dist.into_iter()
        .enumerate()
        .filter(|&(_, p)| p >= threshold)
        .filter_map(|(z, p)| {
            labeling.behavior_of(z).map(|b| CandidateLabel {
                comment_id: comment.id.clone(),
                behavior: b.clone(),
                probability: p,
            })
        })
        .collect()
}

pub fn propose_candidates(
    model: &BtmModel,
    labeling: &TopicLabeling,
    comments: &[Comment],
    pipeline: &TextPipeline,
    threshold: f64,
) -> Result<Vec<CandidateLabel>, LabelError> {
    validate_threshold(threshold)?;
    Ok(comments
        .iter()
        .flat_map(|c| candidates_for(model, labeling, c, pipeline, threshold))
        .collect())
}
