//! End-to-end commands over a work directory.
//!
//! Every artifact has a fixed name inside the work directory, so each
//! command knows which earlier command produces its inputs. Each command
//! writes `manifests/<name>.json` with input and output digests.

pub mod config;
pub mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::adapter::{self, AdapterParams};
use crate::classifier::{
    self, evaluate, evaluate_predictions, majority_predictions, train_head, AnchorInput, Example, HeadParams, Mode,
};
use crate::corpus::{self, Corpus, Credibility};
use crate::embedding::{EmbeddingStore, SyntheticProvider};
use crate::error::{Error, Result};
use crate::gcn::{self, GcnParams, Matrix, NormalizedAdjacency};
use crate::nn::max_relative_error;
use crate::node2vec;
use crate::p2pnet::{self, P2PGraph};
use crate::pairing::{self, Anchor, PairPool};
use crate::rng;
use crate::susceptibility;

pub use config::{Features, PipelineConfig, DEMO_OVERRIDES};
pub use manifest::{sha256_file, Manifest, Recorder};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Synth,
    Ingest {
        submissions: Option<PathBuf>,
        comments: Option<PathBuf>,
        sources: Option<PathBuf>,
    },
    EmbedSynth,
    Pair,
    TrainAdapter,
    Anchors,
    TrainClassifier { mode: Mode },
    Eval { mode: Mode },
    BuildP2p,
    TrainGcn,
    Node2vec,
    Susceptibility { topics: Option<PathBuf> },
    Demo,
    GradCheck,
}

impl Command {
    pub fn name(&self) -> String {
        let mode = |m: &Mode| match m {
            Mode::Single => "single",
            Mode::Siamese => "siamese",
        };
        match self {
            Command::Synth => "synth".into(),
            Command::Ingest { .. } => "ingest".into(),
            Command::EmbedSynth => "embed-synth".into(),
            Command::Pair => "pair".into(),
            Command::TrainAdapter => "train-adapter".into(),
            Command::Anchors => "anchors".into(),
            Command::TrainClassifier { mode: m } => format!("train-classifier-{}", mode(m)),
            Command::Eval { mode: m } => format!("eval-{}", mode(m)),
            Command::BuildP2p => "build-p2p".into(),
            Command::TrainGcn => "train-gcn".into(),
            Command::Node2vec => "node2vec".into(),
            Command::Susceptibility { .. } => "susceptibility".into(),
            Command::Demo => "demo".into(),
            Command::GradCheck => "grad-check".into(),
        }
    }
}

/// Artifact locations inside a work directory.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn raw(&self, name: &str) -> PathBuf {
        self.root.join("raw").join(name)
    }

    fn corpus_file(&self, name: &str) -> PathBuf {
        self.root.join("corpus").join(name)
    }

    pub fn manifest(&self, name: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{name}.json"))
    }

    fn head(&self, mode: Mode) -> PathBuf {
        self.path(&format!("head_{}.bin", mode_str(mode)))
    }

    fn predictions(&self, mode: Mode) -> PathBuf {
        self.path(&format!("predictions_{}.csv", mode_str(mode)))
    }
}

fn mode_str(mode: Mode) -> &'static str {
    match mode {
        Mode::Single => "single",
        Mode::Siamese => "siamese",
    }
}

/// Fails with the command that produces `path` when it does not exist.
fn require(path: &Path, hint: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            hint: hint.to_string(),
        })
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent() {
        ensure_dir(p)?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

/// Result of one command.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub manifest: Manifest,
    /// Short machine-readable summary for the console.
    pub summary: Value,
}

/// Runs one command and writes its manifest.
pub fn run(ws: &Workspace, cfg: &PipelineConfig, cmd: &Command) -> Result<Outcome> {
    cfg.validate()?;
    ensure_dir(&ws.root)?;
    let started = Instant::now();
    let name = cmd.name();
    let mut rec = Recorder::new(&ws.root, Manifest::new(&name, &cfg.hash(), cfg.seed));
    let summary = match cmd {
        Command::Synth => synth(ws, cfg, &mut rec)?,
        Command::Ingest {
            submissions,
            comments,
            sources,
        } => ingest(ws, &mut rec, submissions.as_deref(), comments.as_deref(), sources.as_deref())?,
        Command::EmbedSynth => embed_synth(ws, cfg, &mut rec)?,
        Command::Pair => pair(ws, cfg, &mut rec)?,
        Command::TrainAdapter => train_adapter(ws, cfg, &mut rec)?,
        Command::Anchors => anchors(ws, &mut rec)?,
        Command::TrainClassifier { mode } => train_classifier(ws, cfg, &mut rec, *mode)?,
        Command::Eval { mode } => eval(ws, cfg, &mut rec, *mode)?,
        Command::BuildP2p => build_p2p(ws, cfg, &mut rec)?,
        Command::TrainGcn => train_gcn(ws, cfg, &mut rec)?,
        Command::Node2vec => run_node2vec(ws, cfg, &mut rec)?,
        Command::Susceptibility { topics } => run_susceptibility(ws, cfg, &mut rec, topics.as_deref())?,
        Command::Demo => demo(ws, cfg, &mut rec)?,
        Command::GradCheck => grad_check(ws, cfg, &mut rec)?,
    };
    let mut manifest = rec.manifest;
    manifest.wall_time_ms = started.elapsed().as_millis() as u64;
    write_text(&ws.manifest(&name), &manifest.to_json())?;
    Ok(Outcome { manifest, summary })
}

const CORPUS_FILES: [&str; 3] = ["submissions.jsonl", "comments.jsonl", "sources.jsonl"];

fn synth(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<Value> {
    let data = corpus::synth_dataset(&cfg.synth, cfg.stage_seed("synth"))?;
    ensure_dir(&ws.root.join("raw"))?;
    let [s, c, src] = CORPUS_FILES.map(|f| ws.raw(f));
    data.corpus.write_jsonl(&s, &c, &src)?;
    let topics = ws.raw("topics.jsonl");
    corpus::write_jsonl(&topics, &data.topics)?;
    rec.outputs(&[s, c, src, topics])?;
    Ok(json!({
        "submissions": data.corpus.submissions().len(),
        "comments": data.corpus.comments().len(),
        "verified_submissions": data.corpus.labeled_ids().len(),
    }))
}

fn ingest(
    ws: &Workspace,
    rec: &mut Recorder,
    submissions: Option<&Path>,
    comments: Option<&Path>,
    sources: Option<&Path>,
) -> Result<Value> {
    let hint = "run `synth` or pass --submissions/--comments/--sources";
    let inputs = [submissions, comments, sources]
        .iter()
        .zip(CORPUS_FILES)
        .map(|(given, f)| given.map(Path::to_path_buf).unwrap_or_else(|| ws.raw(f)))
        .collect::<Vec<_>>();
    for p in &inputs {
        require(p, hint)?;
        rec.input(p)?;
    }
    let (corpus, report) = corpus::ingest(&inputs[0], &inputs[1], &inputs[2])?;
    ensure_dir(&ws.root.join("corpus"))?;
    let [s, c, src] = CORPUS_FILES.map(|f| ws.corpus_file(f));
    corpus.write_jsonl(&s, &c, &src)?;
    let report_path = ws.corpus_file("ingest_report.json");
    write_json(&report_path, &report)?;
    rec.outputs(&[s, c, src, report_path])?;
    Ok(serde_json::to_value(&report).expect("serializable"))
}

fn load_corpus(ws: &Workspace, rec: &mut Recorder) -> Result<Corpus> {
    let paths = CORPUS_FILES.map(|f| ws.corpus_file(f));
    for p in &paths {
        require(p, "run `ingest` first")?;
        rec.input(p)?;
    }
    Ok(corpus::ingest(&paths[0], &paths[1], &paths[2])?.0)
}

fn load_store(path: &Path, hint: &str, rec: &mut Recorder) -> Result<EmbeddingStore> {
    require(path, hint)?;
    rec.input(path)?;
    EmbeddingStore::load(path)
}

const BASE_HINT: &str = "run `embed-synth` or import a store";

fn base_store(ws: &Workspace, rec: &mut Recorder) -> Result<EmbeddingStore> {
    load_store(&ws.path("embeddings.embs"), BASE_HINT, rec)
}

fn feature_store(ws: &Workspace, features: Features, rec: &mut Recorder) -> Result<EmbeddingStore> {
    match features {
        Features::Adapted => load_store(&ws.path("adapted.embs"), "run `train-adapter` first (or set features = base)", rec),
        Features::Base => base_store(ws, rec),
    }
}

fn embed_synth(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<Value> {
    let corpus = load_corpus(ws, rec)?;
    let provider = SyntheticProvider::new(cfg.dim, cfg.stage_seed("embed"))?;
    let texts: Vec<(&str, &str)> = corpus
        .submissions()
        .iter()
        .map(|s| (s.id.as_str(), s.text.as_str()))
        .chain(corpus.comments().iter().map(|c| (c.id.as_str(), c.text.as_str())))
        .collect();
    let vectors: Vec<Vec<f64>> = texts
        .par_iter()
        .map(|(_, t)| crate::embedding::EmbeddingProvider::embed(&provider, t))
        .collect::<Result<_>>()?;
    let mut store = EmbeddingStore::new(cfg.dim);
    for ((id, _), v) in texts.iter().zip(&vectors) {
        if store.contains(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        store.insert(*id, v)?;
    }
    let out = ws.path("embeddings.embs");
    store.save(&out)?;
    rec.output(&out)?;
    Ok(json!({ "entries": store.len(), "dim": store.dim() }))
}

fn pair(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<Value> {
    let corpus = load_corpus(ws, rec)?;
    let store = base_store(ws, rec)?;
    let pool = pairing::mine_pairs(&corpus, &store, &cfg.pairing)?;
    let out = ws.path("pairs.csv");
    pairing::write_pairs_csv(&out, pool.pairs())?;
    let summary = pool.summary();
    let summary_path = ws.path("pairs_summary.json");
    write_json(&summary_path, &summary)?;
    rec.outputs(&[out, summary_path])?;
    Ok(serde_json::to_value(&summary).expect("serializable"))
}

fn load_pool(ws: &Workspace, rec: &mut Recorder) -> Result<PairPool> {
    let path = ws.path("pairs.csv");
    require(&path, "run `pair` first")?;
    rec.input(&path)?;
    PairPool::from_pairs(pairing::read_pairs_csv(&path)?)
}

fn data_split(corpus: &Corpus, cfg: &PipelineConfig) -> Result<corpus::Split> {
    corpus::split(corpus, cfg.split, cfg.stage_seed("split"))
}

fn train_adapter(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<Value> {
    let corpus = load_corpus(ws, rec)?;
    let store = base_store(ws, rec)?;
    let pool = load_pool(ws, rec)?;
    let split = data_split(&corpus, cfg)?;
    let train_ids: BTreeSet<&str> = split.train.iter().map(String::as_str).collect();
    let val_ids: BTreeSet<&str> = split.validation.iter().map(String::as_str).collect();
    let part = |id: &str| {
        if train_ids.contains(id) {
            0
        } else if val_ids.contains(id) {
            1
        } else {
            2
        }
    };
    // Pairs touching a test submission are never used for training.
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for p in pool.pairs().iter().filter(|p| p.c_ij.is_some()) {
        match part(&p.i).max(part(&p.j)) {
            0 => train.push(p.clone()),
            1 => val.push(p.clone()),
            _ => {}
        }
    }
    let config = adapter::TrainConfig {
        seed: cfg.stage_seed("adapter"),
        ..cfg.adapter.clone()
    };
    let (params, report) = adapter::train_adapter(&train, &val, &store, &config)?;
    let ckpt = ws.path("adapter.bin");
    params.save(&ckpt)?;
    let loss = ws.path("adapter_loss.csv");
    write_text(&loss, &report.to_csv())?;

    let subs: Vec<&str> = corpus.submissions().iter().map(|s| s.id.as_str()).collect();
    let adapted: Vec<Vec<f64>> = subs
        .par_iter()
        .map(|id| params.embed(&store.require(id)?))
        .collect::<Result<_>>()?;
    let mut out = EmbeddingStore::new(store.dim());
    for (id, v) in subs.iter().zip(&adapted) {
        out.insert(*id, v)?;
    }
    let adapted_path = ws.path("adapted.embs");
    out.save(&adapted_path)?;
    rec.outputs(&[ckpt, loss, adapted_path])?;
    Ok(json!({
        "train_pairs": train.len(),
        "val_pairs": val.len(),
        "initial_train_loss": report.initial_train_loss,
        "final_train_loss": report.epochs.last().map(|e| e.train_loss),
        "best_epoch": report.best_epoch,
    }))
}

fn anchors(ws: &Workspace, rec: &mut Recorder) -> Result<Value> {
    let corpus = load_corpus(ws, rec)?;
    let pool = load_pool(ws, rec)?;
    let anchors = pairing::select_anchors(&pool, &corpus.credibility_scores());
    let path = ws.path("anchors.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| pairing::csv_err(&path, e))?;
    for a in &anchors {
        w.serialize(a).map_err(|e| pairing::csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    rec.output(&path)?;
    Ok(json!({ "anchors": anchors.len(), "submissions": corpus.submissions().len() }))
}

fn load_anchors(ws: &Workspace, rec: &mut Recorder) -> Result<BTreeMap<String, Anchor>> {
    let path = ws.path("anchors.csv");
    require(&path, "run `anchors` first")?;
    rec.input(&path)?;
    let mut r = csv::Reader::from_path(&path).map_err(|e| pairing::csv_err(&path, e))?;
    r.deserialize::<Anchor>()
        .map(|a| {
            let a = a.map_err(|e| pairing::csv_err(&path, e))?;
            Ok((a.submission.clone(), a))
        })
        .collect()
}

/// Builds head inputs; Siamese examples need an anchor and are skipped
/// without one.
fn build_example(
    id: &str,
    label: Credibility,
    feats: &EmbeddingStore,
    anchors: &BTreeMap<String, Anchor>,
    mode: Mode,
) -> Result<Option<Example>> {
    let anchor = match (mode, anchors.get(id)) {
        (Mode::Single, _) => None,
        (Mode::Siamese, None) => return Ok(None),
        (Mode::Siamese, Some(a)) => Some(AnchorInput {
            id: a.anchor.clone(),
            embedding: feats.require(&a.anchor)?,
            score: a.anchor_score,
        }),
    };
    Ok(Some(Example {
        id: id.to_string(),
        embedding: feats.require(id)?,
        anchor,
        label,
    }))
}

fn labeled_examples(
    ids: &[String],
    corpus: &Corpus,
    feats: &EmbeddingStore,
    anchors: &BTreeMap<String, Anchor>,
    mode: Mode,
) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for id in ids {
        let label = corpus
            .label_of(id)
            .ok_or_else(|| Error::invalid(format!("submission `{id}` has no label")))?
            .value;
        if let Some(e) = build_example(id, label, feats, anchors, mode)? {
            out.push(e);
        }
    }
    Ok(out)
}

fn head_inputs(
    ws: &Workspace,
    cfg: &PipelineConfig,
    rec: &mut Recorder,
    mode: Mode,
) -> Result<(Corpus, corpus::Split, EmbeddingStore, BTreeMap<String, Anchor>)> {
    let corpus = load_corpus(ws, rec)?;
    let feats = feature_store(ws, cfg.features, rec)?;
    let anchors = match mode {
        Mode::Siamese => load_anchors(ws, rec)?,
        Mode::Single => BTreeMap::new(),
    };
    let split = data_split(&corpus, cfg)?;
    Ok((corpus, split, feats, anchors))
}

fn train_classifier(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder, mode: Mode) -> Result<Value> {
    let (corpus, split, feats, anchors) = head_inputs(ws, cfg, rec, mode)?;
    let train = labeled_examples(&split.train, &corpus, &feats, &anchors, mode)?;
    let val = labeled_examples(&split.validation, &corpus, &feats, &anchors, mode)?;
    let config = classifier::HeadConfig {
        seed: cfg.stage_seed(&format!("head/{}", mode_str(mode))),
        ..cfg.head.clone()
    };
    let (params, report) = train_head(mode, &train, &val, &config)?;
    let ckpt = ws.head(mode);
    params.save(&ckpt)?;
    let loss = ws.path(&format!("head_{}_loss.csv", mode_str(mode)));
    write_text(&loss, &report.to_csv())?;
    rec.outputs(&[ckpt, loss])?;
    Ok(json!({
        "mode": mode_str(mode),
        "train_examples": train.len(),
        "val_examples": val.len(),
        "best_epoch": report.best_epoch,
    }))
}

#[derive(Serialize, Deserialize)]
struct PredictionRow {
    id: String,
    prob_credible: f64,
    label: usize,
}

fn eval(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder, mode: Mode) -> Result<Value> {
    let (corpus, split, feats, anchors) = head_inputs(ws, cfg, rec, mode)?;
    let ckpt = ws.head(mode);
    require(&ckpt, &format!("run `train-classifier --mode {}` first", mode_str(mode)))?;
    rec.input(&ckpt)?;
    let params = HeadParams::load(&ckpt, mode)?;
    let test = labeled_examples(&split.test, &corpus, &feats, &anchors, mode)?;
    let report = evaluate(&params, &test)?;

    let train_labels: Vec<Credibility> = split
        .train
        .iter()
        .filter_map(|id| corpus.label_of(id).map(|l| l.value))
        .collect();
    let truth: Vec<Credibility> = test.iter().map(|e| e.label).collect();
    let majority = evaluate_predictions(&majority_predictions(&train_labels, truth.len()), &truth)?;

    let model = match (mode, cfg.features) {
        (Mode::Siamese, Features::Adapted) => "adapted+siamese",
        (Mode::Single, Features::Adapted) => "adapted+dense",
        (Mode::Siamese, Features::Base) => "base+siamese",
        (Mode::Single, Features::Base) => "base+dense",
    };
    let result = json!({
        "mode": mode_str(mode),
        "n_test": test.len(),
        "row": report.table_row(model, mode == Mode::Siamese),
        "majority": majority.table_row("majority", false),
        "report": report,
    });
    let out = ws.path(&format!("eval_{}.json", mode_str(mode)));
    write_json(&out, &result)?;

    // Predictions for every scorable submission, verified or not.
    let pred_path = ws.predictions(mode);
    let mut w = csv::Writer::from_path(&pred_path).map_err(|e| pairing::csv_err(&pred_path, e))?;
    for sub in corpus.submissions() {
        let Some(ex) = build_example(&sub.id, Credibility::NonCredible, &feats, &anchors, mode)? else {
            continue;
        };
        let p = params.prob_credible(&ex)?;
        w.serialize(PredictionRow {
            id: sub.id.clone(),
            prob_credible: p,
            label: usize::from(p >= 0.5),
        })
        .map_err(|e| pairing::csv_err(&pred_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&pred_path, e))?;
    rec.outputs(&[out, pred_path])?;
    Ok(result)
}

fn graph_dir(ws: &Workspace) -> PathBuf {
    ws.path("graph")
}

fn build_p2p(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<Value> {
    let corpus = load_corpus(ws, rec)?;
    let store = base_store(ws, rec)?;
    let wanted = corpus
        .submissions()
        .iter()
        .map(|s| s.id.as_str())
        .chain(corpus.comments().iter().map(|c| c.id.as_str()));
    let missing = store.missing(wanted);
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings(missing));
    }
    let reactions = p2pnet::all_reactions(&corpus, &store)?;
    let graph = p2pnet::build_graph(&corpus, &reactions, cfg.m, cfg.filter)?;
    let dir = graph_dir(ws);
    graph.export(&dir)?;
    let summary = graph.summary();
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    rec.outputs(&[dir.join("nodes.tsv"), dir.join("edges.tsv"), summary_path])?;
    Ok(serde_json::to_value(&summary).expect("serializable"))
}

fn load_graph(ws: &Workspace, rec: &mut Recorder) -> Result<P2PGraph> {
    let dir = graph_dir(ws);
    for f in ["nodes.tsv", "edges.tsv"] {
        let p = dir.join(f);
        require(&p, "run `build-p2p` first")?;
        rec.input(&p)?;
    }
    P2PGraph::import(&dir)
}

fn graph_masks(graph: &P2PGraph, cfg: &PipelineConfig) -> Result<gcn::Masks> {
    gcn::node_masks(&graph.nodes, cfg.split, cfg.stage_seed("graph/masks"))
}

fn labels_of(graph: &P2PGraph) -> Vec<Option<Credibility>> {
    graph.nodes.iter().map(|n| n.label).collect()
}

fn train_gcn(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<Value> {
    let graph = load_graph(ws, rec)?;
    if graph.nodes.is_empty() {
        return Err(Error::invalid("the post-to-post graph has no nodes"));
    }
    let feats = feature_store(ws, cfg.gcn_features, rec)?;
    let rows = graph
        .nodes
        .iter()
        .map(|n| feats.require(&n.id))
        .collect::<Result<Vec<_>>>()?;
    let x = Matrix::from_rows(&rows)?;
    let adj = NormalizedAdjacency::from_graph(&graph)?;
    let labels = labels_of(&graph);
    let masks = graph_masks(&graph, cfg)?;
    let config = gcn::GcnConfig {
        seed: cfg.stage_seed("gcn"),
        ..cfg.gcn.clone()
    };
    let (params, report) = gcn::gcn_train(&adj, &x, &labels, &masks, &config)?;
    let eval = gcn::gcn_evaluate(&adj, &x, &params, &labels, &masks.test)?;
    let ckpt = ws.path("gcn.bin");
    params.save(&ckpt)?;
    let loss = ws.path("gcn_loss.csv");
    write_text(&loss, &report.to_csv())?;
    let model = match cfg.gcn_features {
        Features::Adapted => "adapted+gcn",
        Features::Base => "base+gcn",
    };
    let result = json!({
        "n_test": masks.test.len(),
        "row": eval.table_row(model, false),
        "report": eval,
    });
    let out = ws.path("gcn_eval.json");
    write_json(&out, &result)?;
    rec.outputs(&[ckpt, loss, out])?;
    Ok(result)
}

fn run_node2vec(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<Value> {
    let graph = load_graph(ws, rec)?;
    let config = node2vec::Node2vecConfig {
        seed: cfg.stage_seed("node2vec"),
        ..cfg.node2vec.clone()
    };
    let emb = node2vec::node2vec_embed(&graph, &config)?;
    let store_path = ws.path("node2vec.embs");
    node2vec::to_store(&graph, &emb)?.save(&store_path)?;
    let labels = labels_of(&graph);
    let masks = graph_masks(&graph, cfg)?;
    let head = classifier::HeadConfig {
        seed: cfg.stage_seed("node2vec/head"),
        ..cfg.head.clone()
    };
    let (_, eval) = node2vec::node2vec_classify(&emb, &labels, &masks, &head)?;
    let result = json!({
        "n_test": masks.test.len(),
        "row": eval.table_row("node2vec+dense", false),
        "report": eval,
    });
    let out = ws.path("node2vec_eval.json");
    write_json(&out, &result)?;
    rec.outputs(&[store_path, out])?;
    Ok(result)
}

fn load_predictions(ws: &Workspace, rec: &mut Recorder) -> Result<Option<BTreeMap<String, Credibility>>> {
    for mode in [Mode::Siamese, Mode::Single] {
        let path = ws.predictions(mode);
        if !path.exists() {
            continue;
        }
        rec.input(&path)?;
        let mut r = csv::Reader::from_path(&path).map_err(|e| pairing::csv_err(&path, e))?;
        let map = r
            .deserialize::<PredictionRow>()
            .map(|row| {
                let row = row.map_err(|e| pairing::csv_err(&path, e))?;
                Ok((row.id, Credibility::from_class(row.label)))
            })
            .collect::<Result<_>>()?;
        return Ok(Some(map));
    }
    Ok(None)
}

fn run_susceptibility(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder, topics: Option<&Path>) -> Result<Value> {
    let corpus = load_corpus(ws, rec)?;
    let topics_path = topics.map(Path::to_path_buf).unwrap_or_else(|| ws.raw("topics.jsonl"));
    require(&topics_path, "run `synth` or pass --topics")?;
    rec.input(&topics_path)?;
    let topics = susceptibility::read_topics(&topics_path)?;
    susceptibility::validate_topics(&corpus, &topics)?;
    let predicted = match (cfg.label_source, load_predictions(ws, rec)?) {
        (_, Some(p)) => p,
        (susceptibility::LabelSource::Predicted, None) => {
            return Err(Error::MissingArtifact {
                path: ws.predictions(Mode::Siamese),
                hint: "run `eval` first or set label_source = gold".into(),
            })
        }
        (_, None) => BTreeMap::new(),
    };
    let labels = susceptibility::resolve_labels(&corpus, &predicted, cfg.label_source);
    let cells = susceptibility::susceptibility_report(&corpus, &labels, &topics, cfg.min_topic_count);
    let csv_path = ws.path("susceptibility.csv");
    susceptibility::write_report_csv(&cells, &csv_path)?;
    let json_path = ws.path("susceptibility.json");
    write_json(&json_path, &cells)?;
    rec.outputs(&[csv_path, json_path])?;
    Ok(json!({ "cells": cells.len(), "labeled_submissions": labels.len() }))
}

/// The full flow on synthetic data, as a sequence of the individual commands.
pub const DEMO_STEPS: &[&str] = &[
    "synth",
    "ingest",
    "embed-synth",
    "pair",
    "train-adapter",
    "anchors",
    "train-classifier-single",
    "train-classifier-siamese",
    "eval-single",
    "eval-siamese",
    "build-p2p",
    "train-gcn",
    "node2vec",
    "susceptibility",
];

fn demo_commands() -> Vec<Command> {
    vec![
        Command::Synth,
        Command::Ingest {
            submissions: None,
            comments: None,
            sources: None,
        },
        Command::EmbedSynth,
        Command::Pair,
        Command::TrainAdapter,
        Command::Anchors,
        Command::TrainClassifier { mode: Mode::Single },
        Command::TrainClassifier { mode: Mode::Siamese },
        Command::Eval { mode: Mode::Single },
        Command::Eval { mode: Mode::Siamese },
        Command::BuildP2p,
        Command::TrainGcn,
        Command::Node2vec,
        Command::Susceptibility { topics: None },
    ]
}

fn demo(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<Value> {
    let mut rows = Vec::new();
    for cmd in demo_commands() {
        let out = run(ws, cfg, &cmd)?;
        if let Some(row) = out.summary.get("row") {
            rows.push(row.clone());
        }
        if let Some(row) = out.summary.get("majority") {
            if !rows.contains(row) {
                rows.push(row.clone());
            }
        }
        rec.manifest.outputs.extend(out.manifest.outputs.clone());
        rec.manifest.steps.push((cmd.name(), out.manifest.digest()));
    }
    Ok(json!({ "rows": rows }))
}

/// Finite-difference checks of the adapter, both heads and the GCN.
fn grad_check(ws: &Workspace, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<Value> {
    use rand::Rng;
    let seed = cfg.stage_seed("grad-check");
    let mut rng = rng::seeded(seed);
    let mut worst = BTreeMap::new();

    let (d, h) = (16, 8);
    let mut adapter_err: f64 = 0.0;
    for k in 0..10u64 {
        let params = AdapterParams::init(d, h, rng::keyed_seed(seed, 1, k));
        let vecs: Vec<Vec<f64>> = (0..8).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let batch: Vec<adapter::PairRef> = (0..4)
            .map(|p| adapter::PairRef {
                a: &vecs[2 * p],
                b: &vecs[2 * p + 1],
                c_ij: rng.gen_range(0.0..1.0),
            })
            .collect();
        let (_, grad) = adapter::pair_loss_grad(&params, &batch)?;
        let err = max_relative_error(&params, &grad, 1e-6, 1e-5, |p| adapter::pair_loss(p, &batch).unwrap_or(f64::NAN));
        adapter_err = adapter_err.max(err);
    }
    worst.insert("adapter", (adapter_err, 1e-5));

    let n = 6;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.5) {
                edges.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let adj = NormalizedAdjacency::from_edges(n, &edges)?;
    let mut x = Matrix::zeros(n, 8);
    x.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    let labels: Vec<Option<Credibility>> = (0..n).map(|k| Some(Credibility::from_class(k % 2))).collect();
    let params = GcnParams::init(8, 4, rng::keyed_seed(seed, 2, 0));
    let mask: Vec<usize> = (0..n).collect();
    let (_, grad) = gcn::masked_loss_grad(&adj, &x, &params, &labels, &mask)?;
    let gcn_err = max_relative_error(&params, &grad, 1e-6, 1e-5, |p| {
        gcn::masked_loss_grad(&adj, &x, p, &labels, &mask).map(|r| r.0).unwrap_or(f64::NAN)
    });
    worst.insert("gcn", (gcn_err, 1e-4));

    let result: BTreeMap<&str, Value> = worst
        .iter()
        .map(|(k, (err, tol))| (*k, json!({ "max_relative_error": err, "tolerance": tol, "pass": err < tol })))
        .collect();
    let out = ws.path("grad_check.json");
    write_json(&out, &result)?;
    rec.output(&out)?;
    if let Some((k, (err, tol))) = worst.iter().find(|(_, (e, t))| !(e < t)) {
        return Err(Error::numeric(format!("{k} gradient check failed: {err:e} >= {tol:e}")));
    }
    Ok(serde_json::to_value(&result).expect("serializable"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(seed: u64) -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        for (k, v) in DEMO_OVERRIDES {
            cfg.set(k, v).unwrap();
        }
        cfg.apply_text(
            "dim = 32\nsynth.events = 12\nsynth.subs_per_event = 6\nsynth.authors = 40\n\
             adapter.epochs = 3\nadapter.hidden = 8\nhead.epochs = 5\ngcn.epochs = 5\nn2v.walks = 2\nn2v.length = 10\nn2v.dim = 8\n\
             p2p.min_author_comments = 0\np2p.min_post_comments = 0",
            "test",
        )
        .unwrap();
        cfg.seed = seed;
        cfg
    }

    #[test]
    fn missing_store_names_the_producer() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path());
        let cfg = small_config(1);
        run(&ws, &cfg, &Command::Synth).unwrap();
        let ingest = Command::Ingest {
            submissions: None,
            comments: None,
            sources: None,
        };
        run(&ws, &cfg, &ingest).unwrap();
        match run(&ws, &cfg, &Command::Pair) {
            Err(Error::MissingArtifact { hint, .. }) => assert!(hint.contains("run `embed-synth` or import a store")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_demo_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = small_config(3);
        let ra = run(&Workspace::new(a.path()), &cfg, &Command::Demo).unwrap();
        let rb = run(&Workspace::new(b.path()), &cfg, &Command::Demo).unwrap();
        assert_eq!(ra.manifest.digest(), rb.manifest.digest());
        assert_eq!(ra.manifest.steps.len(), DEMO_STEPS.len());
        let names: Vec<&str> = ra.manifest.steps.iter().map(|s| s.0.as_str()).collect();
        assert_eq!(names, DEMO_STEPS);
        // The standalone commands reproduce the demo's files byte for byte.
        let c = tempfile::tempdir().unwrap();
        let ws = Workspace::new(c.path());
        for cmd in demo_commands() {
            run(&ws, &cfg, &cmd).unwrap();
        }
        for (file, digest) in &ra.manifest.outputs {
            assert_eq!(&sha256_file(&c.path().join(file)).unwrap(), digest, "{file}");
        }
        let eval: Value = serde_json::from_str(&fs::read_to_string(a.path().join("eval_siamese.json")).unwrap()).unwrap();
        for key in ["non_credible", "credible", "overall", "f1"] {
            assert!(eval["row"][key].is_number());
        }
    }

    #[test]
    fn grad_check_passes() {
        let dir = tempfile::tempdir().unwrap();
        run(&Workspace::new(dir.path()), &small_config(0), &Command::GradCheck).unwrap();
    }
}
