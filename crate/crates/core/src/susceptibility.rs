//! Topic-level exposure and reaction scores per subreddit.
//!
//! Exposure γ is the mean credibility label of a topic's submissions in a
//! subreddit. Reaction ρ is the same mean weighted by vote score, with
//! negative scores clamped to zero and a plain mean when every weight is 0.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_jsonl, Corpus, Credibility};
use crate::error::{Error, Result};
use crate::pairing::csv_err;

pub const MIN_TOPIC_COUNT: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicAssignment {
    pub submission_id: String,
    pub topic_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_text: Option<String>,
}

/// Where a submission's label came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Gold,
    Predicted,
}

/// Which labels feed the report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    /// Source ratings only; unverified submissions are left out.
    Gold,
    /// Classifier predictions only, for verified and unverified alike.
    Predicted,
    /// Source ratings where available, predictions elsewhere.
    #[default]
    Mixed,
}

impl std::str::FromStr for LabelSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gold" => Ok(LabelSource::Gold),
            "predicted" => Ok(LabelSource::Predicted),
            "mixed" => Ok(LabelSource::Mixed),
            other => Err(Error::Config(format!("unknown label source `{other}` (gold|predicted|mixed)"))),
        }
    }
}

pub type LabelMap = BTreeMap<String, (Credibility, Provenance)>;

/// Combines gold labels from the corpus with predictions per `source`.
pub fn resolve_labels(corpus: &Corpus, predicted: &BTreeMap<String, Credibility>, source: LabelSource) -> LabelMap {
    let mut out = LabelMap::new();
    for sub in corpus.submissions() {
        let gold = corpus.label_of(&sub.id).map(|l| l.value);
        let pred = predicted.get(&sub.id).copied();
        let chosen = match source {
            LabelSource::Gold => gold.map(|g| (g, Provenance::Gold)),
            LabelSource::Predicted => pred.map(|p| (p, Provenance::Predicted)),
            LabelSource::Mixed => gold
                .map(|g| (g, Provenance::Gold))
                .or(pred.map(|p| (p, Provenance::Predicted))),
        };
        if let Some(c) = chosen {
            out.insert(sub.id.clone(), c);
        }
    }
    out
}

fn as_unit(label: Credibility) -> f64 {
    label.class() as f64
}

/// γ: mean of binary labels (credible = 1).
pub fn exposure(labels: &[Credibility]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("exposure of an empty label set"));
    }
    Ok(labels.iter().map(|&l| as_unit(l)).sum::<f64>() / labels.len() as f64)
}

/// ρ: vote-weighted mean of binary labels.
pub fn reaction(labels: &[Credibility], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("reaction of an empty label set"));
    }
    let weights: Vec<f64> = scores.iter().map(|&s| s.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return exposure(labels);
    }
    let weighted: f64 = labels.iter().zip(&weights).map(|(&l, w)| as_unit(l) * w).sum();
    Ok((weighted / total).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityCell {
    pub topic: String,
    pub subreddit: String,
    pub n_submissions: usize,
    pub exposure: f64,
    pub reaction: f64,
    pub delta: f64,
    pub n_gold: usize,
    pub n_predicted: usize,
}

/// Checks that every assignment names a known submission, at most once.
pub fn validate_topics(corpus: &Corpus, topics: &[TopicAssignment]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for t in topics {
        if corpus.submission(&t.submission_id).is_none() {
            return Err(Error::invalid(format!(
                "topic assignment for unknown submission `{}`",
                t.submission_id
            )));
        }
        if !seen.insert(t.submission_id.as_str()) {
            return Err(Error::DuplicateId(t.submission_id.clone()));
        }
    }
    Ok(())
}

/// One cell per (topic, subreddit) with at least `min_topic_count` labeled
/// submissions, ordered by topic then subreddit. Assignments for unknown or
/// unlabeled submissions are ignored.
pub fn susceptibility_report(
    corpus: &Corpus,
    labels: &LabelMap,
    topics: &[TopicAssignment],
    min_topic_count: usize,
) -> Vec<SusceptibilityCell> {
    let mut groups: BTreeMap<(&str, &str), Vec<(Credibility, Provenance, f64)>> = BTreeMap::new();
    for t in topics {
        let (Some(sub), Some(&(label, prov))) = (corpus.submission(&t.submission_id), labels.get(&t.submission_id))
        else {
            continue;
        };
        groups
            .entry((t.topic_id.as_str(), sub.subreddit.as_str()))
            .or_default()
            .push((label, prov, sub.score as f64));
    }
    let groups: Vec<_> = groups.into_iter().filter(|(_, v)| v.len() >= min_topic_count.max(1)).collect();
    groups
        .par_iter()
        .map(|((topic, subreddit), members)| {
            let ls: Vec<Credibility> = members.iter().map(|m| m.0).collect();
            let ss: Vec<f64> = members.iter().map(|m| m.2).collect();
            let gamma = exposure(&ls).expect("nonempty group");
            let rho = reaction(&ls, &ss).expect("nonempty group");
            let n_gold = members.iter().filter(|m| m.1 == Provenance::Gold).count();
            SusceptibilityCell {
                topic: topic.to_string(),
                subreddit: subreddit.to_string(),
                n_submissions: members.len(),
                exposure: gamma,
                reaction: rho,
                delta: rho - gamma,
                n_gold,
                n_predicted: members.len() - n_gold,
            }
        })
        .collect()
}

pub fn read_topics(path: &Path) -> Result<Vec<TopicAssignment>> {
    read_jsonl(path)
}

/// CSV with columns topic, subreddit, n, exposure, reaction, delta.
pub fn write_report_csv(cells: &[SusceptibilityCell], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["topic", "subreddit", "n", "exposure", "reaction", "delta"])
        .map_err(|e| csv_err(path, e))?;
    for c in cells {
        w.write_record([
            c.topic.clone(),
            c.subreddit.clone(),
            c.n_submissions.to_string(),
            c.exposure.to_string(),
            c.reaction.to_string(),
            c.delta.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
