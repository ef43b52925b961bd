//! Cross-module invariants checked on random inputs.

use std::collections::BTreeSet;

use proptest::prelude::*;

use crate::corpus::{self, Comment, Corpus, Submission};
use crate::embedding::EmbeddingStore;
use crate::gcn::NormalizedAdjacency;
use crate::nn::{dot, norm, softmax};
use crate::p2pnet::{self, ActivityFilter};
use crate::pairing::{self, PairingConfig};
use crate::pipeline::PipelineConfig;
use crate::stats;

fn submission(k: usize, t: i64) -> Submission {
    Submission {
        id: format!("s{k:03}"),
        text: format!("post {k}"),
        author_id: "op".into(),
        source_domain: "example.com".into(),
        created_at: 1_600_000_000 + t,
        subreddit: "news".into(),
        score: 1,
        num_comments: 0,
    }
}

fn pair_set(c: &Corpus, store: &EmbeddingStore, threshold: f64, window: i64) -> BTreeSet<(String, String)> {
    let cfg = PairingConfig {
        sim_threshold: threshold,
        time_window: window,
        top_k: None,
    };
    pairing::mine_pairs(c, store, &cfg)
        .unwrap()
        .pairs()
        .iter()
        .map(|p| (p.i.clone(), p.j.clone()))
        .collect()
}

fn posts() -> impl Strategy<Value = (Corpus, EmbeddingStore)> {
    prop::collection::vec((0i64..40 * 86_400, prop::collection::vec(-1.0f64..1.0, 4)), 2..40).prop_map(|rows| {
        let subs = rows.iter().enumerate().map(|(k, (t, _))| submission(k, *t)).collect();
        let c = Corpus::from_parts(subs, Vec::new(), Vec::new()).unwrap().0;
        let mut store = EmbeddingStore::new(4);
        for (k, (_, v)) in rows.iter().enumerate() {
            store.insert(&format!("s{k:03}"), v).unwrap();
        }
        (c, store)
    })
}

/// Submissions with random reply trees and a small author pool.
fn threads() -> impl Strategy<Value = (Corpus, EmbeddingStore)> {
    let comment = (any::<prop::sample::Index>(), any::<bool>(), 0usize..6, prop::collection::vec(-1.0f64..1.0, 3));
    let post = (prop::collection::vec(-1.0f64..1.0, 3), prop::collection::vec(comment, 0..10));
    prop::collection::vec(post, 1..12).prop_map(|posts| {
        let mut subs = Vec::new();
        let mut comments: Vec<Comment> = Vec::new();
        let mut store = EmbeddingStore::new(3);
        for (s, (sv, cs)) in posts.iter().enumerate() {
            let sub = submission(s, 0);
            store.insert(&sub.id, sv).unwrap();
            let mut ids: Vec<String> = Vec::new();
            for (k, (parent, top, author, v)) in cs.iter().enumerate() {
                let id = format!("{}c{k}", sub.id);
                let parent_id = if *top || ids.is_empty() { None } else { Some(parent.get(&ids).clone()) };
                comments.push(Comment {
                    id: id.clone(),
                    submission_id: sub.id.clone(),
                    parent_id,
                    author_id: format!("u{author}"),
                    text: "reply".into(),
                    created_at: 1_600_000_100,
                    tier: 0,
                });
                store.insert(&id, v).unwrap();
                ids.push(id);
            }
            subs.push(sub);
        }
        (Corpus::from_parts(subs, comments, Vec::new()).unwrap().0, store)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairs_equal_brute_force((c, store) in posts(), threshold in -0.5f64..0.95, days in 1i64..20) {
        let window = days * 86_400;
        let subs = c.submissions();
        let mut want = BTreeSet::new();
        for a in 0..subs.len() {
            for b in a + 1..subs.len() {
                let (x, y) = (store.require(&subs[a].id).unwrap(), store.require(&subs[b].id).unwrap());
                let cos = dot(&x, &y) / (norm(&x) * norm(&y));
                if (subs[a].created_at - subs[b].created_at).abs() <= window && cos > threshold {
                    want.insert((subs[a].id.clone(), subs[b].id.clone()));
                }
            }
        }
        prop_assert_eq!(pair_set(&c, &store, threshold, window), want);
    }

    #[test]
    fn stricter_pairing_never_adds((c, store) in posts(), t in 0.0f64..0.9, dt in 0.0f64..0.3, days in 1i64..20, cut in 1i64..20) {
        let base = pair_set(&c, &store, t, days * 86_400);
        prop_assert!(pair_set(&c, &store, (t + dt).min(0.99), days * 86_400).is_subset(&base));
        prop_assert!(pair_set(&c, &store, t, days.min(cut) * 86_400).is_subset(&base));
    }

    #[test]
    fn alpha_is_bounded_and_starts_at_cosine((c, store) in threads()) {
        for s in c.submissions() {
            let alpha = p2pnet::propagate_alpha(&c, &s.id, &store).unwrap();
            prop_assert_eq!(alpha.len(), c.comments_of(&s.id).len());
            let sv = store.require(&s.id).unwrap();
            for cm in c.comments_of(&s.id) {
                let a = alpha[cm.id.as_str()];
                prop_assert!(a.abs() <= 1.0 + 1e-12);
                if cm.parent_id.is_none() {
                    let v = store.require(&cm.id).unwrap();
                    prop_assert!((a - dot(&sv, &v) / (norm(&sv) * norm(&v))).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn graph_edges_respect_threshold((c, store) in threads(), m in 0i64..3) {
        let reactions = p2pnet::all_reactions(&c, &store).unwrap();
        let g = p2pnet::build_graph(&c, &reactions, m, ActivityFilter::NONE).unwrap();
        let looser = p2pnet::build_graph(&c, &reactions, (m - 1).max(0), ActivityFilter::NONE).unwrap();
        let keys = |g: &p2pnet::P2PGraph| g.edges.iter().map(|e| (e.i, e.j)).collect::<BTreeSet<_>>();
        prop_assert!(keys(&g).is_subset(&keys(&looser)));
        for e in &g.edges {
            prop_assert!(e.i < e.j && e.common as i64 > m);
            let (a, b) = (&reactions[&g.nodes[e.i].id], &reactions[&g.nodes[e.j].id]);
            prop_assert!((e.weight - p2pnet::inner(a, b)).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_adjacency_is_symmetric_and_contractive(
        raw in prop::collection::vec((0usize..12, 0usize..12, 0.0f64..3.0), 0..40)
    ) {
        let mut seen = BTreeSet::new();
        let edges: Vec<(usize, usize, f64)> = raw
            .into_iter()
            .filter(|&(i, j, _)| i != j && seen.insert((i.min(j), i.max(j))))
            .collect();
        let adj = NormalizedAdjacency::from_edges(12, &edges).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                prop_assert!((adj.get(i, j) - adj.get(j, i)).abs() < 1e-15);
            }
        }
        prop_assert!(adj.spectral_radius(200) <= 1.0 + 1e-9);
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-500.0f64..500.0, 1..8)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn split_partitions_ids(n in 10usize..200, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|k| format!("id{k}")).collect();
        let s = corpus::split_ids(ids.clone(), [0.8, 0.1, 0.1], seed).unwrap();
        let mut all: Vec<String> = s.train.iter().chain(&s.validation).chain(&s.test).cloned().collect();
        all.sort();
        let mut want = ids.clone();
        want.sort();
        prop_assert_eq!(all, want);
        let again = corpus::split_ids(ids, [0.8, 0.1, 0.1], seed).unwrap();
        prop_assert_eq!(s.test, again.test);
    }

    #[test]
    fn spearman_is_rank_invariant(xs in prop::collection::vec(-100.0f64..100.0, 3..40)) {
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0 * x).collect();
        if let Some(r) = stats::spearman(&xs, &ys) {
            prop_assert!((r - 1.0).abs() < 1e-9);
        }
        let flipped: Vec<f64> = xs.iter().map(|x| -x).collect();
        if let Some(r) = stats::spearman(&xs, &flipped) {
            prop_assert!((r + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rendered_config_round_trips(seed in any::<u64>(), dim in 2usize..1024, lr in 1e-5f64..1.0, m in 0i64..5) {
        let mut cfg = PipelineConfig::default();
        cfg.seed = seed;
        cfg.set("dim", &dim.to_string()).unwrap();
        cfg.set("adapter.lr", &lr.to_string()).unwrap();
        cfg.set("p2p.m", &m.to_string()).unwrap();
        let mut back = PipelineConfig::default();
        back.apply_text(&cfg.render(), "rendered").unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}
