//! Post-to-post graph.
//!
//! Each retained comment gets a signed submission-similarity α: direct
//! replies take the cosine between submission and comment, deeper replies
//! multiply their parent's α by the cosine to the parent. A submission's
//! reaction vector holds, per author, the mean α of that author's comments.
//! Two submissions are joined when they share more than `m` commenters and
//! the edge weight is the inner product of their reaction vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Credibility};
use crate::embedding::{cosine, VectorSource};
use crate::error::{Error, Result};
use crate::pairing::csv_err;

pub const DEFAULT_M: i64 = 1;

/// Comment id → α.
pub type AlphaMap = BTreeMap<String, f64>;

/// Author id → mean α; absent authors are implicit zeros.
pub type ReactionVector = BTreeMap<String, f64>;

/// α for every retained comment of one submission.
pub fn propagate_alpha(corpus: &Corpus, submission_id: &str, vectors: &dyn VectorSource) -> Result<AlphaMap> {
    let sub = corpus
        .submission(submission_id)
        .ok_or_else(|| Error::invalid(format!("unknown submission `{submission_id}`")))?;
    let root = vectors.vector(&sub.id, &sub.text)?.into_owned();
    let mut cache: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut alpha = AlphaMap::new();
    // comments_of is ordered by tier, so parents are always resolved first.
    for c in corpus.comments_of(submission_id) {
        let v = vectors.vector(&c.id, &c.text)?.into_owned();
        let a = if c.tier <= 1 {
            cosine(&root, &v)?
        } else {
            let parent = c.parent_id.as_deref().unwrap_or_default();
            let (Some(pa), Some(pv)) = (alpha.get(parent), cache.get(parent)) else {
                return Err(Error::invalid(format!(
                    "comment `{}` has no resolved parent `{parent}` under `{submission_id}`",
                    c.id
                )));
            };
            pa * cosine(pv, &v)?
        };
        alpha.insert(c.id.clone(), a);
        cache.insert(c.id.as_str(), v);
    }
    Ok(alpha)
}

/// Per-author mean α over the submission's comments.
pub fn reaction_vector(corpus: &Corpus, submission_id: &str, alpha: &AlphaMap) -> ReactionVector {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for c in corpus.comments_of(submission_id) {
        if let Some(a) = alpha.get(&c.id) {
            let e = sums.entry(c.author_id.as_str()).or_default();
            e.0 += a;
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(k, (s, n))| (k.to_string(), s / n as f64)).collect()
}

/// Reaction vectors of every submission, computed in parallel.
pub fn all_reactions(corpus: &Corpus, vectors: &dyn VectorSource) -> Result<BTreeMap<String, ReactionVector>> {
    corpus
        .submissions()
        .par_iter()
        .map(|s| {
            let alpha = propagate_alpha(corpus, &s.id, vectors)?;
            Ok((s.id.clone(), reaction_vector(corpus, &s.id, &alpha)))
        })
        .collect()
}

/// Keeps authors with more than `min_comments_per_author` comments in the
/// corpus, then posts with at least `min_selected_comments_per_post`
/// comments by kept authors. Zero disables a rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityFilter {
    pub min_comments_per_author: usize,
    pub min_selected_comments_per_post: usize,
}

impl Default for ActivityFilter {
    fn default() -> Self {
        ActivityFilter {
            min_comments_per_author: 5,
            min_selected_comments_per_post: 5,
        }
    }
}

impl ActivityFilter {
    pub const NONE: ActivityFilter = ActivityFilter {
        min_comments_per_author: 0,
        min_selected_comments_per_post: 0,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub subreddit: String,
    pub label: Option<Credibility>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Node indices with `i < j`.
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub common: usize,
}

/// Undirected weighted graph over submissions. Nodes are sorted by id and
/// edges by `(i, j)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct P2PGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// Sparse inner product.
pub fn inner(a: &ReactionVector, b: &ReactionVector) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().filter_map(|(k, x)| large.get(k).map(|y| x * y)).sum()
}

pub fn build_graph(
    corpus: &Corpus,
    reactions: &BTreeMap<String, ReactionVector>,
    m: i64,
    filter: ActivityFilter,
) -> Result<P2PGraph> {
    if m < 0 {
        return Err(Error::Config(format!("shared-commenter threshold m = {m} must be non-negative")));
    }
    let m = m as usize;

    let mut per_author: HashMap<&str, usize> = HashMap::new();
    for c in corpus.comments() {
        *per_author.entry(c.author_id.as_str()).or_default() += 1;
    }
    let author_ok = |a: &str| per_author.get(a).copied().unwrap_or(0) > filter.min_comments_per_author;

    let mut nodes = Vec::new();
    let mut vectors: Vec<ReactionVector> = Vec::new();
    for (id, r) in reactions {
        let Some(sub) = corpus.submission(id) else {
            return Err(Error::invalid(format!("reaction vector for unknown submission `{id}`")));
        };
        let selected = corpus.comments_of(id).iter().filter(|c| author_ok(&c.author_id)).count();
        if selected < filter.min_selected_comments_per_post {
            continue;
        }
        let kept: ReactionVector = r.iter().filter(|(a, _)| author_ok(a)).map(|(a, v)| (a.clone(), *v)).collect();
        nodes.push(Node {
            id: id.clone(),
            subreddit: sub.subreddit.clone(),
            label: corpus.label_of(id).map(|l| l.value),
        });
        vectors.push(kept);
    }

    let mut posts_of: HashMap<&str, Vec<usize>> = HashMap::new();
    for (k, r) in vectors.iter().enumerate() {
        for a in r.keys() {
            posts_of.entry(a.as_str()).or_default().push(k);
        }
    }
    let edges: Vec<Edge> = (0..vectors.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut common: BTreeMap<usize, usize> = BTreeMap::new();
            for a in vectors[i].keys() {
                for &j in &posts_of[a.as_str()] {
                    if j > i {
                        *common.entry(j).or_default() += 1;
                    }
                }
            }
            let vectors = &vectors;
            common.into_iter().filter(move |&(_, n)| n > m).map(move |(j, n)| Edge {
                i,
                j,
                weight: inner(&vectors[i], &vectors[j]),
                common: n,
            })
        })
        .collect();
    Ok(P2PGraph { nodes, edges })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub labeled_nodes: usize,
    pub isolated_nodes: usize,
    pub components: usize,
    pub negative_edges: usize,
    pub weight_min: f64,
    pub weight_max: f64,
    /// Ten equal-width bins over `[weight_min, weight_max]`.
    pub weight_histogram: Vec<usize>,
}

impl P2PGraph {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.id.as_str().cmp(id)).ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for e in &self.edges {
            d[e.i] += 1;
            d[e.j] += 1;
        }
        d
    }

    /// Adjacency lists `(neighbor, weight)`, sorted by neighbor.
    pub fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.i].push((e.j, e.weight));
            adj[e.j].push((e.i, e.weight));
        }
        for a in &mut adj {
            a.sort_by_key(|x| x.0);
        }
        adj
    }

    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a] = b;
            }
        }
        (0..self.nodes.len()).filter(|&x| find(&mut parent, x) == x).count()
    }

    pub fn summary(&self) -> GraphSummary {
        let ws: Vec<f64> = self.edges.iter().map(|e| e.weight).collect();
        let lo = ws.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut hist = vec![0usize; 10];
        for &w in &ws {
            let k = if hi > lo { (((w - lo) / (hi - lo)) * 10.0) as usize } else { 0 };
            hist[k.min(9)] += 1;
        }
        GraphSummary {
            nodes: self.nodes.len(),
            edges: self.edges.len(),
            labeled_nodes: self.nodes.iter().filter(|n| n.label.is_some()).count(),
            isolated_nodes: self.degrees().iter().filter(|&&d| d == 0).count(),
            components: self.components(),
            negative_edges: ws.iter().filter(|&&w| w < 0.0).count(),
            weight_min: if ws.is_empty() { 0.0 } else { lo },
            weight_max: if ws.is_empty() { 0.0 } else { hi },
            weight_histogram: hist,
        }
    }

    /// Writes `nodes.tsv` (id, subreddit, label or `?`) and `edges.tsv`
    /// (i, j, weight, common_count) into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("nodes.tsv");
        let mut w = tsv_writer(&path)?;
        w.write_record(["id", "subreddit", "label"]).map_err(|e| csv_err(&path, e))?;
        for n in &self.nodes {
            let label = match n.label {
                Some(l) => l.class().to_string(),
                None => "?".to_string(),
            };
            w.write_record([n.id.as_str(), n.subreddit.as_str(), label.as_str()])
                .map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("edges.tsv");
        let mut w = tsv_writer(&path)?;
        w.write_record(["i", "j", "weight", "common_count"]).map_err(|e| csv_err(&path, e))?;
        for e in &self.edges {
            w.write_record([
                self.nodes[e.i].id.clone(),
                self.nodes[e.j].id.clone(),
                e.weight.to_string(),
                e.common.to_string(),
            ])
            .map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn import(dir: &Path) -> Result<P2PGraph> {
        let path = dir.join("nodes.tsv");
        let mut nodes = Vec::new();
        for (line, rec) in tsv_records(&path)? {
            let [id, subreddit, label] = fields::<3>(&path, line, &rec)?;
            let label = match label {
                "?" => None,
                "0" => Some(Credibility::NonCredible),
                "1" => Some(Credibility::Credible),
                other => return Err(parse_err(&path, line, format!("bad label `{other}`"))),
            };
            nodes.push(Node {
                id: id.to_string(),
                subreddit: subreddit.to_string(),
                label,
            });
        }
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = nodes.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId(w[0].id.clone()));
        }
        let mut graph = P2PGraph { nodes, edges: vec![] };

        let path = dir.join("edges.tsv");
        let mut seen = BTreeSet::new();
        for (line, rec) in tsv_records(&path)? {
            let [a, b, weight, common] = fields::<4>(&path, line, &rec)?;
            let lookup = |id: &str| {
                graph
                    .index_of(id)
                    .ok_or_else(|| parse_err(&path, line, format!("edge references unknown node `{id}`")))
            };
            let (x, y) = (lookup(a)?, lookup(b)?);
            if x == y {
                return Err(parse_err(&path, line, format!("self-loop on `{a}`")));
            }
            let (i, j) = (x.min(y), x.max(y));
            if !seen.insert((i, j)) {
                return Err(parse_err(&path, line, format!("duplicate edge {a} {b}")));
            }
            let weight: f64 = weight
                .parse()
                .map_err(|_| parse_err(&path, line, format!("bad weight `{weight}`")))?;
            let common: usize = common
                .parse()
                .map_err(|_| parse_err(&path, line, format!("bad common_count `{common}`")))?;
            graph.edges.push(Edge { i, j, weight, common });
        }
        graph.edges.sort_by_key(|e| (e.i, e.j));
        Ok(graph)
    }
}

fn tsv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| csv_err(path, e))
}

fn tsv_records(path: &Path) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .quoting(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            Ok((line, rec))
        })
        .collect()
}

fn fields<'r, const N: usize>(path: &Path, line: usize, rec: &'r csv::StringRecord) -> Result<[&'r str; N]> {
    if rec.len() != N {
        return Err(parse_err(path, line, format!("expected {N} fields, found {}", rec.len())));
    }
    Ok(std::array::from_fn(|k| &rec[k]))
}

fn parse_err(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        message,
    }
}
