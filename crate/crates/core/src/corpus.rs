//! Submissions, comment trees and source ratings: ingest, cleaning, tier
//! assignment, credibility labels, seeded splits and synthetic corpora.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::susceptibility::TopicAssignment;

/// Source credibility strictly below this is non-credible.
pub const CREDIBILITY_THRESHOLD: f64 = 0.6;

/// Deepest comment tier kept at ingest.
pub const MAX_TIER: u8 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub id: String,
    pub text: String,
    pub author_id: String,
    pub source_domain: String,
    pub created_at: i64,
    pub subreddit: String,
    pub score: i64,
    pub num_comments: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub submission_id: String,
    pub parent_id: Option<String>,
    pub author_id: String,
    pub text: String,
    pub created_at: i64,
    /// Reply depth; 1 for direct replies to the submission. Derived at ingest.
    #[serde(skip)]
    pub tier: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub domain: String,
    pub credibility: f64,
    #[serde(default)]
    pub bias: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Credibility {
    NonCredible,
    Credible,
}

impl Credibility {
    pub fn from_score(score: f64) -> Self {
        if score < CREDIBILITY_THRESHOLD {
            Credibility::NonCredible
        } else {
            Credibility::Credible
        }
    }

    /// Class index used by the classifiers: 1 = credible.
    pub fn class(self) -> usize {
        match self {
            Credibility::NonCredible => 0,
            Credibility::Credible => 1,
        }
    }

    pub fn from_class(class: usize) -> Self {
        if class == 1 {
            Credibility::Credible
        } else {
            Credibility::NonCredible
        }
    }

    pub fn is_credible(self) -> bool {
        self == Credibility::Credible
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CredibilityLabel {
    pub value: Credibility,
    pub score: f64,
}

/// Credibility label of a submission; `None` when its source is unverified.
pub fn label(sub: &Submission, sources: &BTreeMap<String, SourceRecord>) -> Option<CredibilityLabel> {
    sources.get(&normalize_domain(&sub.source_domain)).map(|s| CredibilityLabel {
        value: Credibility::from_score(s.credibility),
        score: s.credibility,
    })
}

pub fn normalize_domain(domain: &str) -> String {
    domain.trim().to_lowercase()
}

/// Trims and collapses internal whitespace runs to single spaces.
pub fn clean_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `[deleted]` / `[removed]` placeholders, case-insensitive.
pub fn is_removed_marker(s: &str) -> bool {
    let s = s.trim();
    s.eq_ignore_ascii_case("[deleted]") || s.eq_ignore_ascii_case("[removed]")
}

/// Per-rule counts from ingest/cleaning.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub submissions_read: usize,
    pub submissions_kept: usize,
    pub submissions_dropped_removed: usize,
    pub submissions_dropped_empty_text: usize,
    pub submissions_dropped_bad_timestamp: usize,
    pub comments_read: usize,
    pub comments_kept: usize,
    pub comments_dropped_deleted: usize,
    pub comments_dropped_empty_text: usize,
    pub comments_dropped_missing_submission: usize,
    pub comments_dropped_missing_parent: usize,
    pub comments_dropped_tier: usize,
    pub sources: usize,
    pub verified_submissions: usize,
}

/// A cleaned, indexed, immutable corpus.
///
/// Submissions are held sorted by id and comments by
/// `(submission_id, tier, id)`, so every downstream result is independent of
/// input order.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    submissions: Vec<Submission>,
    comments: Vec<Comment>,
    sources: BTreeMap<String, SourceRecord>,
    submission_index: HashMap<String, usize>,
    comment_index: HashMap<String, usize>,
    comment_ranges: HashMap<String, Range<usize>>,
    children: HashMap<(String, Option<String>), Vec<usize>>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.submissions == other.submissions && self.comments == other.comments && self.sources == other.sources
    }
}

impl Corpus {
    /// Builds a corpus from raw records, applying every cleaning rule.
    pub fn from_parts(
        submissions: Vec<Submission>,
        comments: Vec<Comment>,
        sources: Vec<SourceRecord>,
    ) -> Result<(Corpus, IngestReport)> {
        let mut report = IngestReport {
            submissions_read: submissions.len(),
            comments_read: comments.len(),
            ..Default::default()
        };

        let mut source_map = BTreeMap::new();
        for mut s in sources {
            s.domain = normalize_domain(&s.domain);
            if s.domain.is_empty() {
                return Err(Error::invalid("source record with empty domain"));
            }
            if !(0.0..=1.0).contains(&s.credibility) {
                return Err(Error::invalid(format!(
                    "source `{}` credibility {} outside [0, 1]",
                    s.domain, s.credibility
                )));
            }
            let domain = s.domain.clone();
            if source_map.insert(domain.clone(), s).is_some() {
                return Err(Error::DuplicateId(domain));
            }
        }
        report.sources = source_map.len();

        let mut seen = HashSet::new();
        let mut kept_subs = Vec::with_capacity(submissions.len());
        for mut s in submissions {
            if s.id.is_empty() {
                return Err(Error::invalid("submission with empty id"));
            }
            if !seen.insert(s.id.clone()) {
                return Err(Error::DuplicateId(s.id));
            }
            if is_removed_marker(&s.text) {
                report.submissions_dropped_removed += 1;
                continue;
            }
            s.text = clean_text(&s.text);
            if s.text.is_empty() {
                report.submissions_dropped_empty_text += 1;
                continue;
            }
            if s.created_at <= 0 {
                report.submissions_dropped_bad_timestamp += 1;
                continue;
            }
            s.source_domain = normalize_domain(&s.source_domain);
            kept_subs.push(s);
        }
        kept_subs.sort_by(|a, b| a.id.cmp(&b.id));
        let submission_index: HashMap<String, usize> =
            kept_subs.iter().enumerate().map(|(k, s)| (s.id.clone(), k)).collect();

        // Per-comment rules first, then tier assignment over what survives.
        let mut seen = HashSet::new();
        let mut candidates: HashMap<String, Comment> = HashMap::new();
        for mut c in comments {
            if c.id.is_empty() {
                return Err(Error::invalid("comment with empty id"));
            }
            if !seen.insert(c.id.clone()) {
                return Err(Error::DuplicateId(c.id));
            }
            if is_removed_marker(&c.author_id) || is_removed_marker(&c.text) {
                report.comments_dropped_deleted += 1;
                continue;
            }
            c.text = clean_text(&c.text);
            if c.text.is_empty() {
                report.comments_dropped_empty_text += 1;
                continue;
            }
            if !submission_index.contains_key(&c.submission_id) {
                report.comments_dropped_missing_submission += 1;
                continue;
            }
            if c.parent_id.as_deref() == Some(c.submission_id.as_str()) {
                c.parent_id = None;
            }
            candidates.insert(c.id.clone(), c);
        }

        let mut by_parent: HashMap<(&str, Option<&str>), Vec<&str>> = HashMap::new();
        for c in candidates.values() {
            by_parent
                .entry((c.submission_id.as_str(), c.parent_id.as_deref()))
                .or_default()
                .push(c.id.as_str());
        }
        let mut tiers: HashMap<String, u8> = HashMap::new();
        let mut queue: VecDeque<(&str, &str, u32)> = VecDeque::new();
        for s in &kept_subs {
            if let Some(roots) = by_parent.get(&(s.id.as_str(), None)) {
                queue.extend(roots.iter().map(|&r| (s.id.as_str(), r, 1)));
            }
        }
        let mut reached = 0usize;
        while let Some((sub, id, tier)) = queue.pop_front() {
            reached += 1;
            if tier <= MAX_TIER as u32 {
                tiers.insert(id.to_string(), tier as u8);
            }
            if let Some(kids) = by_parent.get(&(sub, Some(id))) {
                queue.extend(kids.iter().map(|&k| (sub, k, tier + 1)));
            }
        }
        report.comments_dropped_tier = reached - tiers.len();
        report.comments_dropped_missing_parent = candidates.len() - reached;

        let mut kept_comments: Vec<Comment> = candidates
            .into_values()
            .filter_map(|mut c| {
                let tier = *tiers.get(&c.id)?;
                c.tier = tier;
                Some(c)
            })
            .collect();
        kept_comments.sort_by(|a, b| {
            (a.submission_id.as_str(), a.tier, a.id.as_str()).cmp(&(b.submission_id.as_str(), b.tier, b.id.as_str()))
        });

        report.submissions_kept = kept_subs.len();
        report.comments_kept = kept_comments.len();
        report.verified_submissions = kept_subs.iter().filter(|s| label(s, &source_map).is_some()).count();

        Ok((Corpus::index(kept_subs, kept_comments, source_map), report))
    }

    fn index(submissions: Vec<Submission>, comments: Vec<Comment>, sources: BTreeMap<String, SourceRecord>) -> Corpus {
        let submission_index = submissions.iter().enumerate().map(|(k, s)| (s.id.clone(), k)).collect();
        let comment_index = comments.iter().enumerate().map(|(k, c)| (c.id.clone(), k)).collect();
        let mut comment_ranges: HashMap<String, Range<usize>> = HashMap::new();
        let mut children: HashMap<(String, Option<String>), Vec<usize>> = HashMap::new();
        for (k, c) in comments.iter().enumerate() {
            comment_ranges
                .entry(c.submission_id.clone())
                .and_modify(|r| r.end = k + 1)
                .or_insert(k..k + 1);
            children
                .entry((c.submission_id.clone(), c.parent_id.clone()))
                .or_default()
                .push(k);
        }
        Corpus {
            submissions,
            comments,
            sources,
            submission_index,
            comment_index,
            comment_ranges,
            children,
        }
    }

    /// Re-applies cleaning. Idempotent on any corpus.
    pub fn clean(&self) -> Result<(Corpus, IngestReport)> {
        Corpus::from_parts(
            self.submissions.clone(),
            self.comments.clone(),
            self.sources.values().cloned().collect(),
        )
    }

    pub fn submissions(&self) -> &[Submission] {
        &self.submissions
    }

    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn sources(&self) -> &BTreeMap<String, SourceRecord> {
        &self.sources
    }

    pub fn submission(&self, id: &str) -> Option<&Submission> {
        self.submission_index.get(id).map(|&k| &self.submissions[k])
    }

    pub fn comment(&self, id: &str) -> Option<&Comment> {
        self.comment_index.get(id).map(|&k| &self.comments[k])
    }

    /// All retained comments of a submission, ordered by (tier, id).
    pub fn comments_of(&self, submission_id: &str) -> &[Comment] {
        match self.comment_ranges.get(submission_id) {
            Some(r) => &self.comments[r.clone()],
            None => &[],
        }
    }

    /// Direct replies to `parent` (`None` = the submission itself).
    pub fn children_of(&self, submission_id: &str, parent: Option<&str>) -> impl Iterator<Item = &Comment> {
        self.children
            .get(&(submission_id.to_string(), parent.map(str::to_string)))
            .into_iter()
            .flatten()
            .map(|&k| &self.comments[k])
    }

    pub fn label_of(&self, submission_id: &str) -> Option<CredibilityLabel> {
        self.submission(submission_id).and_then(|s| label(s, &self.sources))
    }

    /// Source credibility score per verified submission.
    pub fn credibility_scores(&self) -> BTreeMap<String, f64> {
        self.submissions
            .iter()
            .filter_map(|s| label(s, &self.sources).map(|l| (s.id.clone(), l.score)))
            .collect()
    }

    /// Ids of submissions from verified sources, sorted.
    pub fn labeled_ids(&self) -> Vec<String> {
        self.submissions
            .iter()
            .filter(|s| label(s, &self.sources).is_some())
            .map(|s| s.id.clone())
            .collect()
    }

    pub fn write_jsonl(&self, submissions: &Path, comments: &Path, sources: &Path) -> Result<()> {
        write_jsonl(submissions, &self.submissions)?;
        write_jsonl(comments, &self.comments)?;
        write_jsonl(sources, self.sources.values())
    }
}

/// Reads the three corpus files and builds a cleaned corpus.
pub fn ingest(submissions: &Path, comments: &Path, sources: &Path) -> Result<(Corpus, IngestReport)> {
    let subs = read_jsonl::<Submission>(submissions)?;
    let comments = read_jsonl::<Comment>(comments)?;
    let srcs = read_jsonl::<SourceRecord>(sources)?;
    Corpus::from_parts(subs, comments, srcs)
}

/// One JSON value per non-blank line; errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: k + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::invalid(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Disjoint train/validation/test id sets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const DEFAULT_SPLIT: [f64; 3] = [0.8, 0.1, 0.1];

/// Splits the corpus's labeled submissions.
pub fn split(corpus: &Corpus, ratios: [f64; 3], seed: u64) -> Result<Split> {
    let ids = corpus.labeled_ids();
    if ids.len() < 10 {
        return Err(Error::invalid(format!(
            "split needs at least 10 labeled submissions, found {}",
            ids.len()
        )));
    }
    split_ids(ids, ratios, seed)
}

/// Seeded shuffle-and-cut of arbitrary ids. Train and validation sizes are
/// `round(ratio * n)`; test takes the remainder.
pub fn split_ids(mut ids: Vec<String>, ratios: [f64; 3], seed: u64) -> Result<Split> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    ids.sort();
    ids.dedup();
    ids.shuffle(&mut rng::seeded(seed));
    let n = ids.len();
    let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
    let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
    let test = ids.split_off(n_train + n_val);
    let validation = ids.split_off(n_train);
    Ok(Split {
        train: ids,
        validation,
        test,
    })
}

/// Shape of a synthetic corpus.
///
/// Each event is a cluster of submissions sharing a block of topic tokens.
/// Sources sit on credibility levels, and every level has its own small
/// "style" vocabulary, so embeddings carry a learnable credibility signal.
/// Commenters come from two camps that favor credible or non-credible
/// submissions with probability `author_homophily`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub events: usize,
    pub subs_per_event: usize,
    pub sources: usize,
    pub unverified_sources: usize,
    pub credibility_levels: Vec<f64>,
    pub authors: usize,
    pub comments_per_submission: usize,
    pub max_depth: u8,
    pub subreddits: usize,
    pub topics: usize,
    pub start_time: i64,
    pub event_spacing_secs: i64,
    pub event_window_secs: i64,
    pub topic_tokens: usize,
    pub style_tokens: usize,
    pub style_vocab: usize,
    pub noise_tokens: usize,
    pub noise_vocab: usize,
    pub comment_topic_tokens: usize,
    pub author_homophily: f64,
    pub deleted_comment_rate: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            events: 10,
            subs_per_event: 4,
            sources: 8,
            unverified_sources: 2,
            credibility_levels: vec![0.9, 0.2],
            authors: 60,
            comments_per_submission: 8,
            max_depth: MAX_TIER,
            subreddits: 5,
            topics: 4,
            start_time: 1_640_995_200,
            event_spacing_secs: 2 * 86_400,
            event_window_secs: 86_400,
            topic_tokens: 10,
            style_tokens: 3,
            style_vocab: 8,
            noise_tokens: 2,
            noise_vocab: 5000,
            comment_topic_tokens: 3,
            author_homophily: 0.8,
            deleted_comment_rate: 0.0,
        }
    }
}

/// A synthetic corpus plus the ground truth used to generate it.
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub report: IngestReport,
    pub topics: Vec<TopicAssignment>,
    /// Event cluster of each submission.
    pub events: BTreeMap<String, usize>,
    /// Credibility of every source, including ones withheld from the sources file.
    pub hidden_credibility: BTreeMap<String, f64>,
}

pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Result<Corpus> {
    Ok(synth_dataset(spec, seed)?.corpus)
}

pub fn synth_dataset(spec: &SynthSpec, seed: u64) -> Result<SyntheticCorpus> {
    let counts = [
        ("events", spec.events),
        ("subs_per_event", spec.subs_per_event),
        ("sources", spec.sources),
        ("credibility_levels", spec.credibility_levels.len()),
        ("authors", spec.authors),
        ("subreddits", spec.subreddits),
        ("topics", spec.topics),
        ("topic_tokens", spec.topic_tokens),
        ("noise_vocab", spec.noise_vocab),
    ];
    if let Some((name, _)) = counts.iter().find(|(_, n)| *n == 0) {
        return Err(Error::invalid(format!("synthetic spec field `{name}` must be positive")));
    }
    if spec.style_tokens > spec.style_vocab {
        return Err(Error::invalid("style_tokens exceeds style_vocab"));
    }
    if spec.credibility_levels.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::invalid("credibility levels must lie in [0, 1]"));
    }
    let mut rng = rng::seeded(seed);
    let salt: u32 = rng.gen();

    let n_domains = spec.sources + spec.unverified_sources;
    let domain_level: Vec<usize> = (0..n_domains).map(|k| k % spec.credibility_levels.len()).collect();
    let domains: Vec<String> = (0..n_domains)
        .map(|k| {
            if k < spec.sources {
                format!("news{k:02}.example")
            } else {
                format!("blog{:02}.example", k - spec.sources)
            }
        })
        .collect();
    let hidden_credibility: BTreeMap<String, f64> = domains
        .iter()
        .zip(&domain_level)
        .map(|(d, &l)| (d.clone(), spec.credibility_levels[l]))
        .collect();
    let sources: Vec<SourceRecord> = domains[..spec.sources]
        .iter()
        .map(|d| SourceRecord {
            domain: d.clone(),
            credibility: hidden_credibility[d],
            bias: 0.0,
        })
        .collect();

    let style_vocab: Vec<Vec<String>> = (0..spec.credibility_levels.len())
        .map(|l| (0..spec.style_vocab).map(|k| format!("s{salt:08x}l{l}k{k}")).collect())
        .collect();
    let noise_token = |k: usize| format!("n{salt:08x}w{k}");

    let half = (spec.authors / 2).max(1);
    let camps: [Vec<String>; 2] = [
        (0..half).map(|a| format!("u{a:04}")).collect(),
        (half..spec.authors.max(half + 1)).map(|a| format!("u{a:04}")).collect(),
    ];

    let mut submissions = Vec::new();
    let mut comments = Vec::new();
    let mut topics = Vec::new();
    let mut events = BTreeMap::new();
    let width = spec.events * spec.subs_per_event;
    let digits = width.to_string().len().max(3);
    let mut sub_counter = 0usize;
    let mut comment_counter = 0usize;
    for e in 0..spec.events {
        let topic_tokens: Vec<String> = (0..spec.topic_tokens).map(|k| format!("t{salt:08x}e{e}k{k}")).collect();
        let center = spec.start_time + e as i64 * spec.event_spacing_secs;
        for _ in 0..spec.subs_per_event {
            let id = format!("s{sub_counter:0digits$}");
            sub_counter += 1;
            let d = rng.gen_range(0..n_domains);
            let level = domain_level[d];
            let mut tokens = topic_tokens.clone();
            tokens.extend(style_vocab[level].choose_multiple(&mut rng, spec.style_tokens).cloned());
            tokens.extend((0..spec.noise_tokens).map(|_| noise_token(rng.gen_range(0..spec.noise_vocab))));
            tokens.shuffle(&mut rng);
            let created_at = center + rng.gen_range(0..=spec.event_window_secs.max(0));
            let subreddit = format!("r{}", rng.gen_range(0..spec.subreddits));
            let credible = Credibility::from_score(spec.credibility_levels[level]).is_credible();
            let score = if credible {
                rng.gen_range(0..200)
            } else {
                rng.gen_range(-5..120)
            };
            submissions.push(Submission {
                id: id.clone(),
                text: tokens.join(" "),
                author_id: format!("poster{}", rng.gen_range(0..spec.authors)),
                source_domain: domains[d].clone(),
                created_at,
                subreddit,
                score,
                num_comments: spec.comments_per_submission as i64,
            });
            topics.push(TopicAssignment {
                submission_id: id.clone(),
                topic_id: format!("topic{}", e % spec.topics),
                topic_text: None,
            });
            events.insert(id.clone(), e);

            // Comment tree: each comment replies to the submission or to an
            // earlier comment that still has depth budget.
            let favored = if credible { 0 } else { 1 };
            let mut tree: Vec<(String, u8)> = Vec::new();
            for _ in 0..spec.comments_per_submission {
                let cid = format!("c{comment_counter:07}");
                comment_counter += 1;
                let open: Vec<usize> = (0..tree.len()).filter(|&k| tree[k].1 < spec.max_depth).collect();
                let (parent_id, tier) = if open.is_empty() || rng.gen_bool(0.4) {
                    (None, 1)
                } else {
                    let p = open[rng.gen_range(0..open.len())];
                    (Some(tree[p].0.clone()), tree[p].1 + 1)
                };
                let camp = if rng.gen_bool(spec.author_homophily.clamp(0.0, 1.0)) {
                    favored
                } else {
                    1 - favored
                };
                let author = camps[camp].choose(&mut rng).cloned().unwrap_or_default();
                let mut words: Vec<String> = topic_tokens
                    .choose_multiple(&mut rng, spec.comment_topic_tokens.min(topic_tokens.len()))
                    .cloned()
                    .collect();
                words.extend((0..3).map(|_| noise_token(rng.gen_range(0..spec.noise_vocab))));
                words.shuffle(&mut rng);
                let deleted = spec.deleted_comment_rate > 0.0 && rng.gen_bool(spec.deleted_comment_rate.min(1.0));
                comments.push(Comment {
                    id: cid.clone(),
                    submission_id: id.clone(),
                    parent_id,
                    author_id: if deleted { "[deleted]".into() } else { author },
                    text: words.join(" "),
                    created_at: created_at + 60 * (tree.len() as i64 + 1),
                    tier: 0,
                });
                tree.push((cid, tier));
            }
        }
    }
    let (corpus, report) = Corpus::from_parts(submissions, comments, sources)?;
    Ok(SyntheticCorpus {
        corpus,
        report,
        topics,
        events,
        hidden_credibility,
    })
}
