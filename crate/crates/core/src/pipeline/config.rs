//! Flat `key = value` pipeline configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::adapter::TrainConfig;
use crate::classifier::HeadConfig;
use crate::corpus::{SynthSpec, DEFAULT_SPLIT, MAX_TIER};
use crate::embedding::DEFAULT_DIM;
use crate::error::{Error, Result};
use crate::gcn::GcnConfig;
use crate::node2vec::Node2vecConfig;
use crate::p2pnet::{ActivityFilter, DEFAULT_M};
use crate::pairing::PairingConfig;
use crate::rng;
use crate::susceptibility::{LabelSource, MIN_TOPIC_COUNT};

/// Which embeddings feed the classifier heads and the GCN.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Features {
    /// Adapter-transformed embeddings.
    Adapted,
    /// Base provider embeddings.
    Base,
}

impl FromStr for Features {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adapted" => Ok(Features::Adapted),
            "base" => Ok(Features::Base),
            other => Err(Error::Config(format!("unknown feature mode `{other}` (adapted|base)"))),
        }
    }
}

impl Features {
    fn as_str(self) -> &'static str {
        match self {
            Features::Adapted => "adapted",
            Features::Base => "base",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub dim: usize,
    pub pairing: PairingConfig,
    pub split: [f64; 3],
    pub adapter: TrainConfig,
    pub head: HeadConfig,
    pub features: Features,
    pub gcn: GcnConfig,
    pub gcn_features: Features,
    pub node2vec: Node2vecConfig,
    pub m: i64,
    pub filter: ActivityFilter,
    pub min_topic_count: usize,
    pub label_source: LabelSource,
    pub synth: SynthSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            dim: DEFAULT_DIM,
            pairing: PairingConfig::default(),
            split: DEFAULT_SPLIT,
            adapter: TrainConfig::default(),
            head: HeadConfig::default(),
            features: Features::Adapted,
            gcn: GcnConfig::default(),
            gcn_features: Features::Adapted,
            node2vec: Node2vecConfig::default(),
            m: DEFAULT_M,
            filter: ActivityFilter::default(),
            min_topic_count: MIN_TOPIC_COUNT,
            label_source: LabelSource::Mixed,
            synth: SynthSpec {
                events: 40,
                subs_per_event: 10,
                sources: 16,
                unverified_sources: 4,
                authors: 120,
                subreddits: 6,
                topics: 8,
                ..SynthSpec::default()
            },
        }
    }
}

/// Smaller sizes so the full demo stays fast.
pub const DEMO_OVERRIDES: &[(&str, &str)] = &[("dim", "128"), ("adapter.hidden", "64")];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

impl PipelineConfig {
    /// Sets one key; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "dim" => self.dim = parse(key, v)?,
            "sim_threshold" => self.pairing.sim_threshold = parse(key, v)?,
            "time_window_days" => {
                let days: f64 = parse(key, v)?;
                self.pairing.time_window = (days * 86_400.0).round() as i64;
            }
            "top_k" => self.pairing.top_k = if v == "none" { None } else { Some(parse(key, v)?) },
            "max_tier" => {
                if parse::<u8>(key, v)? != MAX_TIER {
                    return Err(Error::Config(format!("max_tier is fixed at {MAX_TIER}")));
                }
            }
            "split.train" => self.split[0] = parse(key, v)?,
            "split.val" => self.split[1] = parse(key, v)?,
            "split.test" => self.split[2] = parse(key, v)?,
            "adapter.lr" => self.adapter.learning_rate = parse(key, v)?,
            "adapter.epochs" => self.adapter.epochs = parse(key, v)?,
            "adapter.batch_size" => self.adapter.batch_size = parse(key, v)?,
            "adapter.patience" => self.adapter.patience = parse(key, v)?,
            "adapter.hidden" => self.adapter.hidden = parse(key, v)?,
            "head.lr" => self.head.learning_rate = parse(key, v)?,
            "head.epochs" => self.head.epochs = parse(key, v)?,
            "head.batch_size" => self.head.batch_size = parse(key, v)?,
            "head.patience" => self.head.patience = parse(key, v)?,
            "features" => self.features = v.parse()?,
            "gcn.hidden" => self.gcn.hidden = parse(key, v)?,
            "gcn.lr" => self.gcn.learning_rate = parse(key, v)?,
            "gcn.epochs" => self.gcn.epochs = parse(key, v)?,
            "gcn.patience" => self.gcn.patience = parse(key, v)?,
            "gcn.features" => self.gcn_features = v.parse()?,
            "n2v.p" => self.node2vec.p = parse(key, v)?,
            "n2v.q" => self.node2vec.q = parse(key, v)?,
            "n2v.walks" => self.node2vec.walks_per_node = parse(key, v)?,
            "n2v.length" => self.node2vec.walk_length = parse(key, v)?,
            "n2v.dim" => self.node2vec.dim = parse(key, v)?,
            "n2v.window" => self.node2vec.window = parse(key, v)?,
            "n2v.negatives" => self.node2vec.negatives = parse(key, v)?,
            "n2v.epochs" => self.node2vec.epochs = parse(key, v)?,
            "n2v.lr" => self.node2vec.learning_rate = parse(key, v)?,
            "p2p.m" => self.m = parse(key, v)?,
            "p2p.min_author_comments" => self.filter.min_comments_per_author = parse(key, v)?,
            "p2p.min_post_comments" => self.filter.min_selected_comments_per_post = parse(key, v)?,
            "min_topic_count" => self.min_topic_count = parse(key, v)?,
            "label_source" => self.label_source = v.parse()?,
            "synth.events" => self.synth.events = parse(key, v)?,
            "synth.subs_per_event" => self.synth.subs_per_event = parse(key, v)?,
            "synth.sources" => self.synth.sources = parse(key, v)?,
            "synth.unverified_sources" => self.synth.unverified_sources = parse(key, v)?,
            "synth.authors" => self.synth.authors = parse(key, v)?,
            "synth.comments" => self.synth.comments_per_submission = parse(key, v)?,
            "synth.subreddits" => self.synth.subreddits = parse(key, v)?,
            "synth.topics" => self.synth.topics = parse(key, v)?,
            "synth.homophily" => self.synth.author_homophily = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}:{}: expected `key = value`", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 8 {
            return Err(Error::Config(format!("dim = {} is too small (need >= 8)", self.dim)));
        }
        self.pairing.validate()?;
        if self.split.iter().any(|r| !(0.0..=1.0).contains(r)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split {:?} must be non-negative and sum to 1", self.split)));
        }
        self.adapter.validate()?;
        self.node2vec.validate()?;
        if self.m < 0 {
            return Err(Error::Config(format!("p2p.m = {} must be non-negative", self.m)));
        }
        if self.head.batch_size == 0 || !(self.head.learning_rate > 0.0) {
            return Err(Error::Config("head batch size and learning rate must be positive".into()));
        }
        if self.gcn.hidden == 0 || !(self.gcn.learning_rate > 0.0) {
            return Err(Error::Config("gcn hidden size and learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Every setting as `key -> value`, in a canonical text form.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let s = |x: &dyn ToString| x.to_string();
        BTreeMap::from([
            ("seed", s(&self.seed)),
            ("dim", s(&self.dim)),
            ("sim_threshold", s(&self.pairing.sim_threshold)),
            ("time_window_days", s(&(self.pairing.time_window as f64 / 86_400.0))),
            ("top_k", self.pairing.top_k.map_or("none".into(), |k| k.to_string())),
            ("max_tier", s(&MAX_TIER)),
            ("split.train", s(&self.split[0])),
            ("split.val", s(&self.split[1])),
            ("split.test", s(&self.split[2])),
            ("adapter.lr", s(&self.adapter.learning_rate)),
            ("adapter.epochs", s(&self.adapter.epochs)),
            ("adapter.batch_size", s(&self.adapter.batch_size)),
            ("adapter.patience", s(&self.adapter.patience)),
            ("adapter.hidden", s(&self.adapter.hidden)),
            ("head.lr", s(&self.head.learning_rate)),
            ("head.epochs", s(&self.head.epochs)),
            ("head.batch_size", s(&self.head.batch_size)),
            ("head.patience", s(&self.head.patience)),
            ("features", self.features.as_str().into()),
            ("gcn.hidden", s(&self.gcn.hidden)),
            ("gcn.lr", s(&self.gcn.learning_rate)),
            ("gcn.epochs", s(&self.gcn.epochs)),
            ("gcn.patience", s(&self.gcn.patience)),
            ("gcn.features", self.gcn_features.as_str().into()),
            ("n2v.p", s(&self.node2vec.p)),
            ("n2v.q", s(&self.node2vec.q)),
            ("n2v.walks", s(&self.node2vec.walks_per_node)),
            ("n2v.length", s(&self.node2vec.walk_length)),
            ("n2v.dim", s(&self.node2vec.dim)),
            ("n2v.window", s(&self.node2vec.window)),
            ("n2v.negatives", s(&self.node2vec.negatives)),
            ("n2v.epochs", s(&self.node2vec.epochs)),
            ("n2v.lr", s(&self.node2vec.learning_rate)),
            ("p2p.m", s(&self.m)),
            ("p2p.min_author_comments", s(&self.filter.min_comments_per_author)),
            ("p2p.min_post_comments", s(&self.filter.min_selected_comments_per_post)),
            ("min_topic_count", s(&self.min_topic_count)),
            (
                "label_source",
                match self.label_source {
                    LabelSource::Gold => "gold",
                    LabelSource::Predicted => "predicted",
                    LabelSource::Mixed => "mixed",
                }
                .into(),
            ),
            ("synth.events", s(&self.synth.events)),
            ("synth.subs_per_event", s(&self.synth.subs_per_event)),
            ("synth.sources", s(&self.synth.sources)),
            ("synth.unverified_sources", s(&self.synth.unverified_sources)),
            ("synth.authors", s(&self.synth.authors)),
            ("synth.comments", s(&self.synth.comments_per_submission)),
            ("synth.subreddits", s(&self.synth.subreddits)),
            ("synth.topics", s(&self.synth.topics)),
            ("synth.homophily", s(&self.synth.author_homophily)),
        ])
    }

    pub fn render(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the canonical rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }

    /// Seed of a named stage, derived from the root seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        rng::substream_seed(self.seed, stage)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::{DEFAULT_SIM_THRESHOLD, DEFAULT_TIME_WINDOW};

    #[test]
    fn defaults_match_stated_values() {
        let c = PipelineConfig::default();
        assert_eq!(c.pairing.sim_threshold, DEFAULT_SIM_THRESHOLD);
        assert_eq!(c.pairing.time_window, DEFAULT_TIME_WINDOW);
        assert_eq!(c.split, [0.8, 0.1, 0.1]);
        assert_eq!(c.min_topic_count, 4);
        let e = c.entries();
        assert_eq!(e["time_window_days"], "15");
        assert_eq!(e["max_tier"], "4");
        c.validate().unwrap();
    }

    #[test]
    fn rendering_round_trips() {
        let mut c = PipelineConfig::default();
        c.apply_text("seed = 7\n# comment\ndim=64  # trailing\nfeatures = base\ntop_k = 3\n", "t")
            .unwrap();
        let mut d = PipelineConfig::default();
        let rendered: String = c
            .entries()
            .into_iter()
            .filter(|(k, _)| *k != "max_tier")
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        d.apply_text(&rendered, "r").unwrap();
        assert_eq!(c, d);
        assert_eq!(c.hash(), d.hash());
        assert_ne!(c.hash(), PipelineConfig::default().hash());
    }

    #[test]
    fn bad_input_is_a_config_error() {
        let mut c = PipelineConfig::default();
        assert!(matches!(c.apply_text("nope = 1", "t"), Err(Error::Config(_))));
        assert!(matches!(c.apply_text("dim = x", "t"), Err(Error::Config(_))));
        assert!(matches!(c.apply_text("dim", "t"), Err(Error::Config(_))));
        c.set("sim_threshold", "1.5").unwrap();
        assert!(c.validate().is_err());
    }
}
