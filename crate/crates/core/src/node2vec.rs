//! node2vec: second-order biased random walks over `|w|`, then skip-gram
//! with negative sampling. Only graph structure is used, never text.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{evaluate, train_head, EvalReport, Example, HeadConfig, HeadParams, Mode};
use crate::corpus::Credibility;
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::gcn::Masks;
use crate::nn::dot;
use crate::p2pnet::P2PGraph;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node2vecConfig {
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Node2vecConfig {
    fn default() -> Self {
        Node2vecConfig {
            p: 1.0,
            q: 1.0,
            walks_per_node: 10,
            walk_length: 40,
            dim: 64,
            window: 5,
            negatives: 5,
            epochs: 1,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl Node2vecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(Error::Config(format!("node2vec p and q must be positive (p={}, q={})", self.p, self.q)));
        }
        if self.walks_per_node == 0
            || self.walk_length == 0
            || self.dim == 0
            || self.window == 0
            || self.negatives == 0
            || self.epochs == 0
        {
            return Err(Error::Config("node2vec counts and sizes must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("node2vec learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Adjacency lists with `|w|` propensities, sorted by neighbor.
pub fn walk_adjacency(graph: &P2PGraph) -> Vec<Vec<(usize, f64)>> {
    graph
        .neighbors()
        .into_iter()
        .map(|row| row.into_iter().map(|(j, w)| (j, w.abs())).collect())
        .collect()
}

/// Normalized next-step distribution from `cur`, having arrived from
/// `prev`. Empty when `cur` has no neighbor with nonzero propensity.
pub fn transition_probs(adj: &[Vec<(usize, f64)>], prev: Option<usize>, cur: usize, p: f64, q: f64) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = adj[cur]
        .iter()
        .map(|&(next, w)| {
            let bias = match prev {
                None => 1.0,
                Some(t) if next == t => 1.0 / p,
                Some(t) if adj[t].binary_search_by_key(&next, |x| x.0).is_ok() => 1.0,
                Some(_) => 1.0 / q,
            };
            (next, w * bias)
        })
        .collect();
    let total: f64 = out.iter().map(|x| x.1).sum();
    if total <= 0.0 {
        return Vec::new();
    }
    out.iter_mut().for_each(|x| x.1 /= total);
    out
}

fn walk_from(adj: &[Vec<(usize, f64)>], start: usize, config: &Node2vecConfig, seed: u64) -> Vec<usize> {
    let mut rng = rng::seeded(seed);
    let mut walk = vec![start];
    while walk.len() < config.walk_length {
        let cur = *walk.last().unwrap();
        let prev = walk.len().checked_sub(2).map(|k| walk[k]);
        let probs = transition_probs(adj, prev, cur, config.p, config.q);
        if probs.is_empty() {
            break;
        }
        let mut u: f64 = rng.gen();
        let mut next = probs.last().unwrap().0;
        for &(j, pr) in &probs {
            if u < pr {
                next = j;
                break;
            }
            u -= pr;
        }
        walk.push(next);
    }
    walk
}

/// `walks_per_node` walks from every node, ordered by round then node.
/// Each walk has its own seed derived from (seed, node, round), so the
/// result does not depend on the thread count.
pub fn random_walks(graph: &P2PGraph, config: &Node2vecConfig) -> Result<Vec<Vec<usize>>> {
    config.validate()?;
    let adj = walk_adjacency(graph);
    let root = rng::substream_seed(config.seed, "node2vec/walks");
    let n = graph.nodes.len();
    Ok((0..config.walks_per_node * n)
        .into_par_iter()
        .map(|k| {
            let (round, node) = (k / n, k % n);
            walk_from(&adj, node, config, rng::keyed_seed(root, node as u64, round as u64))
        })
        .collect())
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skip-gram with negative sampling over the walks. Returns one row per
/// node.
pub fn skipgram(n: usize, walks: &[Vec<usize>], config: &Node2vecConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let dim = config.dim;
    let mut init = rng::substream(config.seed, "node2vec/init");
    let mut emb: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| (init.gen::<f64>() - 0.5) / dim as f64).collect())
        .collect();
    let mut ctx: Vec<Vec<f64>> = vec![vec![0.0; dim]; n];

    let mut counts = vec![0.0f64; n];
    for w in walks {
        for &v in w {
            counts[v] += 1.0;
        }
    }
    if counts.iter().all(|&c| c == 0.0) {
        return Ok(emb);
    }
    let noise = WeightedIndex::new(counts.iter().map(|c| c.powf(0.75)))
        .map_err(|e| Error::numeric(format!("negative-sampling table: {e}")))?;

    let per_epoch: usize = walks
        .iter()
        .map(|w| (0..w.len()).map(|i| w.len().min(i + config.window + 1) - i.saturating_sub(config.window) - 1).sum::<usize>())
        .sum();
    let total = (per_epoch * config.epochs).max(1) as f64;
    let lr_floor = config.learning_rate * 1e-4;
    let mut rng = rng::substream(config.seed, "node2vec/sgd");
    let mut seen = 0usize;
    let mut grad = vec![0.0; dim];
    for _ in 0..config.epochs {
        for w in walks {
            for (i, &center) in w.iter().enumerate() {
                let lo = i.saturating_sub(config.window);
                let hi = w.len().min(i + config.window + 1);
                for (j, &context) in w.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let lr = (config.learning_rate * (1.0 - seen as f64 / total)).max(lr_floor);
                    seen += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let g = lr * (label - sigmoid(dot(&emb[center], &ctx[target])));
                        for d in 0..dim {
                            grad[d] += g * ctx[target][d];
                            ctx[target][d] += g * emb[center][d];
                        }
                    }
                    for d in 0..dim {
                        emb[center][d] += grad[d];
                    }
                }
            }
        }
    }
    Ok(emb)
}

/// Walks plus skip-gram.
pub fn node2vec_embed(graph: &P2PGraph, config: &Node2vecConfig) -> Result<Vec<Vec<f64>>> {
    let walks = random_walks(graph, config)?;
    skipgram(graph.nodes.len(), &walks, config)
}

/// Node embeddings keyed by submission id.
pub fn to_store(graph: &P2PGraph, embeddings: &[Vec<f64>]) -> Result<EmbeddingStore> {
    let dim = embeddings.first().map_or(0, Vec::len);
    let mut store = EmbeddingStore::new(dim);
    for (node, e) in graph.nodes.iter().zip(embeddings) {
        store.insert(node.id.clone(), e)?;
    }
    Ok(store)
}

fn examples(embeddings: &[Vec<f64>], labels: &[Option<Credibility>], idx: &[usize]) -> Result<Vec<Example>> {
    idx.iter()
        .map(|&k| {
            let label = labels
                .get(k)
                .copied()
                .flatten()
                .ok_or_else(|| Error::invalid(format!("masked node {k} has no label")))?;
            Ok(Example {
                id: format!("node{k}"),
                embedding: embeddings[k].clone(),
                anchor: None,
                label,
            })
        })
        .collect()
}

/// Dense single-branch head over node embeddings, scored on the test mask.
pub fn node2vec_classify(
    embeddings: &[Vec<f64>],
    labels: &[Option<Credibility>],
    masks: &Masks,
    config: &HeadConfig,
) -> Result<(HeadParams, EvalReport)> {
    let train = examples(embeddings, labels, &masks.train)?;
    let val = examples(embeddings, labels, &masks.val)?;
    let test = examples(embeddings, labels, &masks.test)?;
    let (params, _) = train_head(Mode::Single, &train, &val, config)?;
    let report = evaluate(&params, &test)?;
    Ok((params, report))
}
