//! Mining pairs of submissions that cover the same event: cosine above a
//! threshold and posting times within a window. Also stratified sampling of
//! training pairs and anchor selection.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{cosine_with_norms, EmbeddingStore};
use crate::error::{Error, Result};
use crate::nn::norm;
use crate::rng;

pub const DEFAULT_SIM_THRESHOLD: f64 = 0.6;
pub const DEFAULT_TIME_WINDOW: i64 = 15 * 86_400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingConfig {
    /// Pairs need cosine strictly above this.
    pub sim_threshold: f64,
    /// Maximum |t_i - t_j| in seconds, inclusive.
    pub time_window: i64,
    /// Optional per-submission cap for large corpora. A pair survives when it
    /// is among the `top_k` most similar partners of either endpoint. Output
    /// is no longer the exact pool when set.
    pub top_k: Option<usize>,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig {
            sim_threshold: DEFAULT_SIM_THRESHOLD,
            time_window: DEFAULT_TIME_WINDOW,
            top_k: None,
        }
    }
}

impl PairingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sim_threshold > -1.0 && self.sim_threshold < 1.0) {
            return Err(Error::Config(format!(
                "similarity threshold {} must lie in (-1, 1)",
                self.sim_threshold
            )));
        }
        if self.time_window <= 0 {
            return Err(Error::Config(format!("time window {} must be positive", self.time_window)));
        }
        if self.top_k == Some(0) {
            return Err(Error::Config("top_k must be positive when set".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarPair {
    pub i: String,
    pub j: String,
    pub similarity: f64,
    /// |c_i - c_j| when both sources are verified.
    pub c_ij: Option<f64>,
    pub dt: i64,
}

impl SimilarPair {
    pub fn key(&self) -> (&str, &str) {
        (&self.i, &self.j)
    }

    pub fn partner_of(&self, id: &str) -> Option<&str> {
        if self.i == id {
            Some(&self.j)
        } else if self.j == id {
            Some(&self.i)
        } else {
            None
        }
    }
}

/// Canonically ordered pairs (`i < j`, sorted by `(i, j)`) with a
/// per-submission index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairPool {
    pairs: Vec<SimilarPair>,
    index: BTreeMap<String, Vec<usize>>,
}

impl PairPool {
    pub fn from_pairs(mut pairs: Vec<SimilarPair>) -> Result<Self> {
        for p in &mut pairs {
            if p.i == p.j {
                return Err(Error::invalid(format!("self-pair on `{}`", p.i)));
            }
            if p.i > p.j {
                std::mem::swap(&mut p.i, &mut p.j);
            }
        }
        pairs.sort_by(|a, b| a.key().cmp(&b.key()));
        if let Some(w) = pairs.windows(2).find(|w| w[0].key() == w[1].key()) {
            return Err(Error::DuplicateId(format!("{}|{}", w[0].i, w[0].j)));
        }
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (k, p) in pairs.iter().enumerate() {
            index.entry(p.i.clone()).or_default().push(k);
            index.entry(p.j.clone()).or_default().push(k);
        }
        Ok(PairPool { pairs, index })
    }

    pub fn pairs(&self) -> &[SimilarPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs that involve `id`.
    pub fn pairs_of<'a>(&'a self, id: &str) -> impl Iterator<Item = &'a SimilarPair> + 'a {
        self.index.get(id).into_iter().flatten().map(move |&k| &self.pairs[k])
    }

    /// Submissions with at least one partner.
    pub fn members(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn summary(&self) -> PoolSummary {
        let mut deciles = [0usize; 10];
        let mut with_c = 0;
        for c in self.pairs.iter().filter_map(|p| p.c_ij) {
            with_c += 1;
            deciles[bin_of(c, 10)] += 1;
        }
        PoolSummary {
            pairs: self.pairs.len(),
            submissions_paired: self.index.len(),
            pairs_with_c_ij: with_c,
            c_ij_deciles: deciles.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub pairs: usize,
    pub submissions_paired: usize,
    pub pairs_with_c_ij: usize,
    pub c_ij_deciles: Vec<usize>,
}

fn bin_of(c: f64, bins: usize) -> usize {
    ((c * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

struct Entry<'a> {
    id: &'a str,
    t: i64,
    v: Vec<f64>,
    norm: f64,
}

/// All pairs with `cos(e_i, e_j) > threshold` and `|t_i - t_j| <= window`.
///
/// Submissions are sorted by time and each one is compared only against the
/// following submissions inside the window, so the result is exact.
pub fn mine_pairs(corpus: &Corpus, store: &EmbeddingStore, config: &PairingConfig) -> Result<PairPool> {
    config.validate()?;
    let subs = corpus.submissions();
    let missing = store.missing(subs.iter().map(|s| s.id.as_str()));
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings(missing));
    }
    let mut entries: Vec<Entry> = subs
        .iter()
        .map(|s| {
            let v = store.get(&s.id).unwrap_or_default();
            Entry {
                id: &s.id,
                t: s.created_at,
                norm: norm(&v),
                v,
            }
        })
        .collect();
    if let Some(e) = entries.iter().find(|e| e.norm == 0.0) {
        return Err(Error::numeric(format!("zero-norm embedding for `{}`", e.id)));
    }
    entries.sort_by(|a, b| (a.t, a.id).cmp(&(b.t, b.id)));

    let scores = corpus.credibility_scores();
    let chunks: Vec<Vec<SimilarPair>> = (0..entries.len())
        .into_par_iter()
        .map(|k| {
            let a = &entries[k];
            let mut out = Vec::new();
            for b in entries[k + 1..].iter().take_while(|b| b.t - a.t <= config.time_window) {
                let sim = cosine_with_norms(&a.v, &b.v, a.norm, b.norm).expect("norms checked");
                if sim > config.sim_threshold {
                    out.push(make_pair(a.id, b.id, sim, b.t - a.t, &scores));
                }
            }
            out
        })
        .collect();
    let mut pairs: Vec<SimilarPair> = chunks.into_iter().flatten().collect();
    if let Some(k) = config.top_k {
        pairs = cap_top_k(pairs, k);
    }
    PairPool::from_pairs(pairs)
}

pub(crate) fn make_pair(a: &str, b: &str, similarity: f64, dt: i64, scores: &BTreeMap<String, f64>) -> SimilarPair {
    let (i, j) = if a < b { (a, b) } else { (b, a) };
    let c_ij = match (scores.get(i), scores.get(j)) {
        (Some(ci), Some(cj)) => Some((ci - cj).abs()),
        _ => None,
    };
    SimilarPair {
        i: i.to_string(),
        j: j.to_string(),
        similarity,
        c_ij,
        dt,
    }
}

fn cap_top_k(pairs: Vec<SimilarPair>, k: usize) -> Vec<SimilarPair> {
    let mut by_sub: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (n, p) in pairs.iter().enumerate() {
        by_sub.entry(&p.i).or_default().push(n);
        by_sub.entry(&p.j).or_default().push(n);
    }
    let mut keep = HashSet::new();
    for (id, mut list) in by_sub {
        list.sort_by(|&x, &y| {
            pairs[y]
                .similarity
                .total_cmp(&pairs[x].similarity)
                .then_with(|| pairs[x].partner_of(id).cmp(&pairs[y].partner_of(id)))
        });
        keep.extend(list.into_iter().take(k));
    }
    pairs
        .into_iter()
        .enumerate()
        .filter(|(n, _)| keep.contains(n))
        .map(|(_, p)| p)
        .collect()
}

/// Stratified sample over equal-width `c_ij` bins on [0, 1].
///
/// Quotas are water-filled: every bin gets an equal share of `n`, and the
/// share a small bin cannot use is redistributed to bins that still have
/// pairs. Within a bin, pairs are drawn uniformly without replacement.
pub fn balanced_sample(pool: &PairPool, n: usize, bins: usize, seed: u64) -> Result<Vec<SimilarPair>> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    if bins < 2 {
        return Err(Error::invalid("balanced sampling needs at least 2 bins"));
    }
    let mut grouped: Vec<Vec<&SimilarPair>> = vec![Vec::new(); bins];
    for p in pool.pairs() {
        if let Some(c) = p.c_ij {
            grouped[bin_of(c, bins)].push(p);
        }
    }
    let capacity: Vec<usize> = grouped.iter().map(Vec::len).collect();
    let quota = water_fill(&capacity, n);

    let mut rng = rng::seeded(seed);
    let mut out = Vec::with_capacity(quota.iter().sum());
    for (members, q) in grouped.iter_mut().zip(quota) {
        let (chosen, _) = members.partial_shuffle(&mut rng, q);
        out.extend(chosen.iter().map(|p| (*p).clone()));
    }
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(out)
}

fn water_fill(capacity: &[usize], n: usize) -> Vec<usize> {
    let mut quota = vec![0usize; capacity.len()];
    let mut remaining = n.min(capacity.iter().sum());
    while remaining > 0 {
        let open: Vec<usize> = (0..capacity.len()).filter(|&b| quota[b] < capacity[b]).collect();
        let share = remaining / open.len();
        let mut extra = remaining % open.len();
        for b in open {
            let mut want = share;
            if extra > 0 {
                want += 1;
                extra -= 1;
            }
            let give = want.min(capacity[b] - quota[b]);
            quota[b] += give;
            remaining -= give;
        }
    }
    quota
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub submission: String,
    pub anchor: String,
    pub anchor_score: f64,
    pub similarity: f64,
}

/// Most similar verified partner of `id` in the pool; ties go to the
/// lexicographically smallest partner id.
pub fn select_anchor(id: &str, pool: &PairPool, scores: &BTreeMap<String, f64>) -> Option<Anchor> {
    pool.pairs_of(id)
        .filter_map(|p| {
            let partner = p.partner_of(id)?;
            scores.get(partner).map(|&s| (partner, s, p.similarity))
        })
        .min_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(b.0)))
        .map(|(partner, score, similarity)| Anchor {
            submission: id.to_string(),
            anchor: partner.to_string(),
            anchor_score: score,
            similarity,
        })
}

/// Anchors for every paired submission that has a verified partner.
pub fn select_anchors(pool: &PairPool, scores: &BTreeMap<String, f64>) -> Vec<Anchor> {
    pool.members().filter_map(|id| select_anchor(id, pool, scores)).collect()
}

#[derive(Serialize, Deserialize)]
struct PairRow {
    i: String,
    j: String,
    similarity: f64,
    c_ij: Option<f64>,
    dt: i64,
}

/// CSV with header `i,j,similarity,c_ij,dt`; `c_ij` empty when absent.
pub fn write_pairs_csv(path: &Path, pairs: &[SimilarPair]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for p in pairs {
        w.serialize(PairRow {
            i: p.i.clone(),
            j: p.j.clone(),
            similarity: p.similarity,
            c_ij: p.c_ij,
            dt: p.dt,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pairs_csv(path: &Path) -> Result<Vec<SimilarPair>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize::<PairRow>()
        .map(|row| {
            row.map(|p| SimilarPair {
                i: p.i,
                j: p.j,
                similarity: p.similarity,
                c_ij: p.c_ij,
                dt: p.dt,
            })
            .map_err(|e| csv_err(path, e))
        })
        .collect()
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        file: path.display().to_string(),
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SourceRecord, Submission};
    use crate::embedding::cosine;

    fn sub(id: &str, text: &str, t: i64, domain: &str) -> Submission {
        Submission {
            id: id.into(),
            text: text.into(),
            author_id: "p".into(),
            source_domain: domain.into(),
            created_at: t,
            subreddit: "r".into(),
            score: 0,
            num_comments: 0,
        }
    }

    fn pair(i: &str, j: &str, sim: f64, c: Option<f64>) -> SimilarPair {
        SimilarPair {
            i: i.into(),
            j: j.into(),
            similarity: sim,
            c_ij: c,
            dt: 0,
        }
    }

    fn store_for(corpus: &Corpus) -> EmbeddingStore {
        let p = crate::embedding::SyntheticProvider::new(64, 3).unwrap();
        let mut store = EmbeddingStore::new(64);
        for s in corpus.submissions() {
            store.insert(&s.id, &crate::embedding::EmbeddingProvider::embed(&p, &s.text).unwrap()).unwrap();
        }
        store
    }

    #[test]
    fn identical_texts_pair_within_window_only() {
        let day = 86_400;
        let subs = vec![
            sub("a", "same words here", 1_000_000, "x.com"),
            sub("b", "same words here", 1_000_000 + 3600, "y.com"),
            sub("c", "same words here", 1_000_000 + 3600 + 16 * day, "x.com"),
        ];
        let sources = vec![
            SourceRecord {
                domain: "x.com".into(),
                credibility: 0.9,
                bias: 0.0,
            },
            SourceRecord {
                domain: "y.com".into(),
                credibility: 0.3,
                bias: 0.0,
            },
        ];
        let (corpus, _) = Corpus::from_parts(subs, vec![], sources).unwrap();
        let pool = mine_pairs(&corpus, &store_for(&corpus), &PairingConfig::default()).unwrap();
        let keys: Vec<(&str, &str)> = pool.pairs().iter().map(|p| p.key()).collect();
        assert_eq!(keys, vec![("a", "b")]);
        let p = &pool.pairs()[0];
        assert!((p.similarity - 1.0).abs() < 1e-6);
        assert!((p.c_ij.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(p.dt, 3600);
    }

    #[test]
    fn missing_embedding_lists_ids() {
        let (corpus, _) =
            Corpus::from_parts(vec![sub("a", "t", 5, "x"), sub("b", "t", 6, "x")], vec![], vec![]).unwrap();
        let store = EmbeddingStore::new(64);
        match mine_pairs(&corpus, &store, &PairingConfig::default()) {
            Err(Error::MissingEmbeddings(ids)) => assert_eq!(ids, vec!["a", "b"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn brute_force_agreement_on_synthetic_corpus() {
        let spec = crate::corpus::SynthSpec {
            events: 50,
            subs_per_event: 4,
            event_spacing_secs: 3 * 86_400,
            ..Default::default()
        };
        let corpus = crate::corpus::synth_corpus(&spec, 21).unwrap();
        let store = store_for(&corpus);
        let cfg = PairingConfig::default();
        let pool = mine_pairs(&corpus, &store, &cfg).unwrap();
        let subs = corpus.submissions();
        let mut oracle = Vec::new();
        for a in 0..subs.len() {
            for b in a + 1..subs.len() {
                let (x, y) = (&subs[a], &subs[b]);
                let c = cosine(&store.get(&x.id).unwrap(), &store.get(&y.id).unwrap()).unwrap();
                if c > cfg.sim_threshold && (x.created_at - y.created_at).abs() <= cfg.time_window {
                    let (i, j) = if x.id < y.id { (&x.id, &y.id) } else { (&y.id, &x.id) };
                    oracle.push((i.clone(), j.clone()));
                }
            }
        }
        oracle.sort();
        let got: Vec<(String, String)> = pool.pairs().iter().map(|p| (p.i.clone(), p.j.clone())).collect();
        assert!(!got.is_empty());
        assert_eq!(got, oracle);
    }

    #[test]
    fn top_k_caps_partners() {
        let pairs = vec![
            pair("a", "b", 0.9, None),
            pair("a", "c", 0.8, None),
            pair("a", "d", 0.7, None),
            pair("c", "d", 0.95, None),
        ];
        let capped = cap_top_k(pairs, 1);
        let keys: Vec<(&str, &str)> = capped.iter().map(|p| p.key()).collect();
        // a keeps b; b keeps a; c and d keep each other.
        assert_eq!(keys, vec![("a", "b"), ("c", "d")]);
    }

    #[test]
    fn pool_rejects_duplicates_and_canonicalizes() {
        let pool = PairPool::from_pairs(vec![pair("b", "a", 0.7, None)]).unwrap();
        assert_eq!(pool.pairs()[0].key(), ("a", "b"));
        assert!(PairPool::from_pairs(vec![pair("a", "b", 0.7, None), pair("b", "a", 0.8, None)]).is_err());
    }

    fn decile_pool(per_bin: usize) -> PairPool {
        let mut pairs = Vec::new();
        for b in 0..10 {
            for k in 0..per_bin {
                let c = (b as f64 + 0.5) / 10.0;
                pairs.push(pair(&format!("x{b}_{k}"), &format!("y{b}_{k}"), 0.7, Some(c)));
            }
        }
        PairPool::from_pairs(pairs).unwrap()
    }

    #[test]
    fn balanced_sample_equal_bins() {
        let pool = decile_pool(100);
        let s = balanced_sample(&pool, 100, 10, 3).unwrap();
        assert_eq!(s.len(), 100);
        let mut counts = [0; 10];
        for p in &s {
            counts[bin_of(p.c_ij.unwrap(), 10)] += 1;
        }
        assert_eq!(counts, [10; 10]);
        assert_eq!(s, balanced_sample(&pool, 100, 10, 3).unwrap());
        assert_ne!(s, balanced_sample(&pool, 100, 10, 4).unwrap());
    }

    #[test]
    fn balanced_sample_single_bin_takes_everything_needed() {
        let pairs: Vec<SimilarPair> = (0..80).map(|k| pair(&format!("a{k}"), &format!("b{k}"), 0.7, Some(0.0))).collect();
        let pool = PairPool::from_pairs(pairs).unwrap();
        let s = balanced_sample(&pool, 50, 10, 1).unwrap();
        assert_eq!(s.len(), 50);
        assert!(balanced_sample(&pool, 0, 10, 1).is_err());
        assert!(balanced_sample(&pool, 5, 1, 1).is_err());
    }

    #[test]
    fn balanced_sample_skips_unlabeled_and_never_exceeds_n() {
        let mut pairs: Vec<SimilarPair> = (0..7).map(|k| pair(&format!("a{k}"), &format!("b{k}"), 0.7, Some(0.95))).collect();
        pairs.push(pair("u", "v", 0.9, None));
        let pool = PairPool::from_pairs(pairs).unwrap();
        let s = balanced_sample(&pool, 3, 4, 1).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|p| p.c_ij.is_some()));
        assert_eq!(balanced_sample(&pool, 100, 4, 1).unwrap().len(), 7);
    }

    #[test]
    fn anchor_is_argmax_with_lexicographic_ties() {
        let scores: BTreeMap<String, f64> = ["b", "c", "d", "a2", "a10"].iter().map(|s| (s.to_string(), 0.5)).collect();
        let pool = PairPool::from_pairs(vec![pair("i", "b", 0.7, None), pair("i", "c", 0.9, None), pair("i", "d", 0.8, None)]).unwrap();
        assert_eq!(select_anchor("i", &pool, &scores).unwrap().anchor, "c");

        let pool = PairPool::from_pairs(vec![pair("i", "a2", 0.9, None), pair("i", "a10", 0.9, None)]).unwrap();
        assert_eq!(select_anchor("i", &pool, &scores).unwrap().anchor, "a10");

        assert!(select_anchor("zz", &pool, &scores).is_none());
    }

    #[test]
    fn anchor_skips_unverified_partners() {
        let scores: BTreeMap<String, f64> = [("b".to_string(), 0.3)].into_iter().collect();
        let pool = PairPool::from_pairs(vec![pair("i", "b", 0.7, None), pair("i", "u", 0.99, None)]).unwrap();
        let a = select_anchor("i", &pool, &scores).unwrap();
        assert_eq!((a.anchor.as_str(), a.anchor_score), ("b", 0.3));
    }

    #[test]
    fn pairs_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let pairs = vec![pair("a", "b", 0.123456789, Some(0.25)), pair("a", "c", 0.99, None)];
        write_pairs_csv(&path, &pairs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("i,j,similarity,c_ij,dt\n"));
        assert!(text.contains("a,c,0.99,,0"));
        assert_eq!(read_pairs_csv(&path).unwrap(), pairs);
    }
}
