//! Binary credibility heads over submission embeddings.
//!
//! * Single branch: `d → 32 → 16 → 2` (ReLU, softmax).
//! * Siamese: a shared `d → 32 → 16` branch embeds the submission and its
//!   anchor; the head sees the element-wise absolute difference of the two
//!   branch outputs plus the anchor's credibility score (17 inputs) and maps
//!   them through an 8-unit ReLU layer to two softmax logits.
//!
//! Class 1 is "credible"; hard predictions threshold the credible
//! probability at 0.5.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adapter::{EpochRecord, LossReport};
use crate::checkpoint;
use crate::corpus::Credibility;
use crate::error::{Error, Result};
use crate::nn::{cross_entropy, relu, relu_backward, softmax, Adam, AdamConfig, Dense, Parameters};
use crate::rng;

pub const BRANCH_SIZES: [usize; 2] = [32, 16];
pub const HEAD_HIDDEN: usize = 8;
pub const SIAMESE_MAGIC: &[u8; 4] = b"SIAM";
pub const SINGLE_MAGIC: &[u8; 4] = b"SNGL";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Siamese,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Mode::Single),
            "siamese" => Ok(Mode::Siamese),
            other => Err(Error::Config(format!("unknown head mode `{other}` (single|siamese)"))),
        }
    }
}

/// The shared `d → 32 → 16` ReLU stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub l1: Dense,
    pub l2: Dense,
}

struct BranchCache {
    pre1: Vec<f64>,
    act1: Vec<f64>,
    pre2: Vec<f64>,
    out: Vec<f64>,
}

impl Branch {
    fn new<R: Rng>(dim: usize, rng: &mut R) -> Self {
        Branch {
            l1: Dense::he(dim, BRANCH_SIZES[0], rng),
            l2: Dense::he(BRANCH_SIZES[0], BRANCH_SIZES[1], rng),
        }
    }

    fn zeros(dim: usize) -> Self {
        Branch {
            l1: Dense::zeros(dim, BRANCH_SIZES[0]),
            l2: Dense::zeros(BRANCH_SIZES[0], BRANCH_SIZES[1]),
        }
    }

    fn forward(&self, x: &[f64]) -> Result<BranchCache> {
        let pre1 = self.l1.forward(x)?;
        let act1 = relu(&pre1);
        let pre2 = self.l2.forward(&act1)?;
        let out = relu(&pre2);
        Ok(BranchCache { pre1, act1, pre2, out })
    }

    fn backward(&self, x: &[f64], cache: &BranchCache, grad_out: &[f64], grad: &mut Branch) {
        let mut g2 = grad_out.to_vec();
        relu_backward(&cache.pre2, &mut g2);
        let mut g1 = self.l2.backward(&cache.act1, &g2, &mut grad.l2);
        relu_backward(&cache.pre1, &mut g1);
        self.l1.backward(x, &g1, &mut grad.l1);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleHeadParams {
    pub branch: Branch,
    pub out: Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiameseParams {
    pub branch: Branch,
    pub hidden: Dense,
    pub out: Dense,
}

impl Parameters for SingleHeadParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let b = &self.branch;
        vec![&b.l1.w, &b.l1.b, &b.l2.w, &b.l2.b, &self.out.w, &self.out.b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let b = &mut self.branch;
        vec![
            &mut b.l1.w,
            &mut b.l1.b,
            &mut b.l2.w,
            &mut b.l2.b,
            &mut self.out.w,
            &mut self.out.b,
        ]
    }
}

impl Parameters for SiameseParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let b = &self.branch;
        vec![
            &b.l1.w,
            &b.l1.b,
            &b.l2.w,
            &b.l2.b,
            &self.hidden.w,
            &self.hidden.b,
            &self.out.w,
            &self.out.b,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let b = &mut self.branch;
        vec![
            &mut b.l1.w,
            &mut b.l1.b,
            &mut b.l2.w,
            &mut b.l2.b,
            &mut self.hidden.w,
            &mut self.hidden.b,
            &mut self.out.w,
            &mut self.out.b,
        ]
    }
}

impl SingleHeadParams {
    pub fn init(dim: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        SingleHeadParams {
            branch: Branch::new(dim, &mut rng),
            out: Dense::glorot(BRANCH_SIZES[1], 2, &mut rng),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SingleHeadParams {
            branch: Branch::zeros(dim),
            out: Dense::zeros(BRANCH_SIZES[1], 2),
        }
    }

    pub fn dim(&self) -> usize {
        self.branch.l1.inp
    }

    pub fn logits(&self, e_sub: &[f64]) -> Result<Vec<f64>> {
        let cache = self.branch.forward(e_sub)?;
        self.out.forward(&cache.out)
    }

    /// Cross-entropy of one example, accumulating gradients into `grad`.
    fn loss_grad(&self, x: &[f64], target: usize, scale: f64, grad: &mut SingleHeadParams) -> Result<f64> {
        let cache = self.branch.forward(x)?;
        let logits = self.out.forward(&cache.out)?;
        let loss = cross_entropy(&logits, target);
        let mut g = softmax(&logits);
        g[target] -= 1.0;
        g.iter_mut().for_each(|v| *v *= scale);
        let g_branch = self.out.backward(&cache.out, &g, &mut grad.out);
        self.branch.backward(x, &cache, &g_branch, &mut grad.branch);
        Ok(loss)
    }
}

impl SiameseParams {
    pub fn init(dim: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        SiameseParams {
            branch: Branch::new(dim, &mut rng),
            hidden: Dense::he(BRANCH_SIZES[1] + 1, HEAD_HIDDEN, &mut rng),
            out: Dense::glorot(HEAD_HIDDEN, 2, &mut rng),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SiameseParams {
            branch: Branch::zeros(dim),
            hidden: Dense::zeros(BRANCH_SIZES[1] + 1, HEAD_HIDDEN),
            out: Dense::zeros(HEAD_HIDDEN, 2),
        }
    }

    pub fn dim(&self) -> usize {
        self.branch.l1.inp
    }

    /// Head input: `|u - v|` followed by the anchor score.
    pub fn features(&self, e_sub: &[f64], e_anchor: &[f64], anchor_score: f64) -> Result<Vec<f64>> {
        if e_sub.len() != e_anchor.len() {
            return Err(Error::DimensionMismatch {
                expected: e_sub.len(),
                got: e_anchor.len(),
            });
        }
        let u = self.branch.forward(e_sub)?.out;
        let v = self.branch.forward(e_anchor)?.out;
        let mut f: Vec<f64> = u.iter().zip(&v).map(|(a, b)| (a - b).abs()).collect();
        f.push(anchor_score);
        Ok(f)
    }

    pub fn logits(&self, e_sub: &[f64], e_anchor: &[f64], anchor_score: f64) -> Result<Vec<f64>> {
        let f = self.features(e_sub, e_anchor, anchor_score)?;
        let h = relu(&self.hidden.forward(&f)?);
        self.out.forward(&h)
    }

    fn loss_grad(
        &self,
        x: &[f64],
        anchor: &[f64],
        score: f64,
        target: usize,
        scale: f64,
        grad: &mut SiameseParams,
    ) -> Result<f64> {
        if x.len() != anchor.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: anchor.len(),
            });
        }
        let cu = self.branch.forward(x)?;
        let cv = self.branch.forward(anchor)?;
        let diff: Vec<f64> = cu.out.iter().zip(&cv.out).map(|(a, b)| a - b).collect();
        let mut f: Vec<f64> = diff.iter().map(|d| d.abs()).collect();
        f.push(score);
        let pre = self.hidden.forward(&f)?;
        let h = relu(&pre);
        let logits = self.out.forward(&h)?;
        let loss = cross_entropy(&logits, target);

        let mut g = softmax(&logits);
        g[target] -= 1.0;
        g.iter_mut().for_each(|v| *v *= scale);
        let mut gh = self.out.backward(&h, &g, &mut grad.out);
        relu_backward(&pre, &mut gh);
        let gf = self.hidden.backward(&f, &gh, &mut grad.hidden);
        // d|d|/dd = sign(d), with sign(0) = 0.
        let gu: Vec<f64> = diff.iter().zip(&gf).map(|(d, g)| g * sign(*d)).collect();
        let gv: Vec<f64> = gu.iter().map(|g| -g).collect();
        self.branch.backward(x, &cu, &gu, &mut grad.branch);
        self.branch.backward(anchor, &cv, &gv, &mut grad.branch);
        Ok(loss)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Probability of "credible" from the Siamese head.
pub fn forward_siamese(params: &SiameseParams, e_sub: &[f64], e_anchor: &[f64], anchor_score: f64) -> Result<f64> {
    Ok(softmax(&params.logits(e_sub, e_anchor, anchor_score)?)[1])
}

/// Probability of "credible" from the single-branch head.
pub fn forward_single(params: &SingleHeadParams, e_sub: &[f64]) -> Result<f64> {
    Ok(softmax(&params.logits(e_sub)?)[1])
}

/// Either head, as produced by [`train_head`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum HeadParams {
    Single(SingleHeadParams),
    Siamese(SiameseParams),
}

impl HeadParams {
    pub fn mode(&self) -> Mode {
        match self {
            HeadParams::Single(_) => Mode::Single,
            HeadParams::Siamese(_) => Mode::Siamese,
        }
    }

    pub fn prob_credible(&self, ex: &Example) -> Result<f64> {
        match (self, &ex.anchor) {
            (HeadParams::Single(p), _) => forward_single(p, &ex.embedding),
            (HeadParams::Siamese(p), Some(a)) => forward_siamese(p, &ex.embedding, &a.embedding, a.score),
            (HeadParams::Siamese(_), None) => Err(Error::invalid(format!("example `{}` has no anchor", ex.id))),
        }
    }

    pub fn predict(&self, ex: &Example) -> Result<Credibility> {
        Ok(if self.prob_credible(ex)? >= 0.5 {
            Credibility::Credible
        } else {
            Credibility::NonCredible
        })
    }

    fn loss(&self, data: &[Example]) -> Result<f64> {
        let mut total = 0.0;
        for ex in data {
            let logits = match (self, &ex.anchor) {
                (HeadParams::Single(p), _) => p.logits(&ex.embedding)?,
                (HeadParams::Siamese(p), Some(a)) => p.logits(&ex.embedding, &a.embedding, a.score)?,
                (HeadParams::Siamese(_), None) => {
                    return Err(Error::invalid(format!("example `{}` has no anchor", ex.id)))
                }
            };
            total += cross_entropy(&logits, ex.label.class());
        }
        Ok(total / data.len().max(1) as f64)
    }

    fn zeros_like(&self) -> HeadParams {
        match self {
            HeadParams::Single(p) => HeadParams::Single(SingleHeadParams::zeros(p.dim())),
            HeadParams::Siamese(p) => HeadParams::Siamese(SiameseParams::zeros(p.dim())),
        }
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn loss_grad(&self, batch: &[&Example]) -> Result<(f64, HeadParams)> {
        let mut grad = self.zeros_like();
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut total = 0.0;
        for ex in batch {
            let target = ex.label.class();
            total += match (self, &mut grad, &ex.anchor) {
                (HeadParams::Single(p), HeadParams::Single(g), _) => p.loss_grad(&ex.embedding, target, scale, g)?,
                (HeadParams::Siamese(p), HeadParams::Siamese(g), Some(a)) => {
                    p.loss_grad(&ex.embedding, &a.embedding, a.score, target, scale, g)?
                }
                _ => return Err(Error::invalid(format!("example `{}` has no anchor", ex.id))),
            };
        }
        Ok((total * scale, grad))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            HeadParams::Single(p) => checkpoint::save(path, SINGLE_MAGIC, &[p.dim() as u32], p),
            HeadParams::Siamese(p) => checkpoint::save(path, SIAMESE_MAGIC, &[p.dim() as u32], p),
        }
    }

    pub fn load(path: &Path, mode: Mode) -> Result<Self> {
        Ok(match mode {
            Mode::Single => HeadParams::Single(*checkpoint::load(path, SINGLE_MAGIC, 1, |d| {
                Ok(Box::new(SingleHeadParams::zeros(d[0] as usize)))
            })?),
            Mode::Siamese => HeadParams::Siamese(*checkpoint::load(path, SIAMESE_MAGIC, 1, |d| {
                Ok(Box::new(SiameseParams::zeros(d[0] as usize)))
            })?),
        })
    }
}

impl Parameters for HeadParams {
    fn tensors(&self) -> Vec<&[f64]> {
        match self {
            HeadParams::Single(p) => p.tensors(),
            HeadParams::Siamese(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            HeadParams::Single(p) => p.tensors_mut(),
            HeadParams::Siamese(p) => p.tensors_mut(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorInput {
    pub id: String,
    pub embedding: Vec<f64>,
    pub score: f64,
}

/// One labeled submission, optionally with its anchor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub embedding: Vec<f64>,
    pub anchor: Option<AnchorInput>,
    pub label: Credibility,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            learning_rate: 3e-3,
            epochs: 200,
            batch_size: 32,
            patience: 20,
            seed: 0,
        }
    }
}

/// Trains a head with mini-batch Adam on mean cross-entropy; returns the
/// parameters with the lowest validation loss (training loss when the
/// validation set is empty).
pub fn train_head(mode: Mode, train: &[Example], val: &[Example], config: &HeadConfig) -> Result<(HeadParams, LossReport)> {
    let Some(first) = train.first() else {
        return Err(Error::invalid("empty head training set"));
    };
    if !(config.learning_rate > 0.0) || config.batch_size == 0 {
        return Err(Error::Config("head learning rate and batch size must be positive".into()));
    }
    if train.iter().all(|e| e.label == first.label) {
        return Err(Error::invalid(format!(
            "training set has a single class ({:?}); cannot train a classifier",
            first.label
        )));
    }
    let dim = first.embedding.len();
    if let Some(bad) = train.iter().chain(val).find(|e| e.embedding.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.embedding.len(),
        });
    }
    if mode == Mode::Siamese {
        if let Some(bad) = train.iter().chain(val).find(|e| e.anchor.is_none()) {
            return Err(Error::invalid(format!("example `{}` has no anchor", bad.id)));
        }
    }

    let init_seed = rng::substream_seed(config.seed, "head/init");
    let mut params = match mode {
        Mode::Single => HeadParams::Single(SingleHeadParams::init(dim, init_seed)),
        Mode::Siamese => HeadParams::Siamese(SiameseParams::init(dim, init_seed)),
    };
    let select = |p: &HeadParams, train_loss: f64| -> Result<f64> {
        if val.is_empty() {
            Ok(train_loss)
        } else {
            p.loss(val)
        }
    };
    let initial_train_loss = params.loss(train)?;
    let initial_val_loss = select(&params, initial_train_loss)?;
    let mut report = LossReport {
        initial_train_loss,
        initial_val_loss,
        ..Default::default()
    };
    let mut best = (initial_val_loss, params.clone());
    let mut opt = Adam::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            ..Default::default()
        },
        &params,
    );
    let mut shuffle_rng = rng::substream(config.seed, "head/shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        let started = std::time::Instant::now();
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&k| &train[k]).collect();
            let (_, grad) = params.loss_grad(&batch)?;
            opt.step(&mut params, &grad);
        }
        if !params.all_finite() {
            return Err(Error::numeric(format!("head parameters diverged at epoch {epoch}")));
        }
        let train_loss = params.loss(train)?;
        let val_loss = select(&params, train_loss)?;
        report.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            wall_ms: started.elapsed().as_millis() as u64,
        });
        if val_loss < best.0 {
            best = (val_loss, params.clone());
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok((best.1, report))
}

/// Confusion counts with "credible" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_credible: usize,
    pub false_noncredible: usize,
    pub false_credible: usize,
    pub true_noncredible: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_credible + self.false_noncredible + self.false_credible + self.true_noncredible
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Recall on the credible class.
    pub accuracy_credible: f64,
    /// Recall on the non-credible class.
    pub accuracy_noncredible: f64,
    pub accuracy_overall: f64,
    /// Unweighted mean of the two per-class F1 scores.
    pub f1_macro: f64,
    pub f1_credible: f64,
    pub f1_noncredible: f64,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

/// Metrics from hard predictions.
pub fn evaluate_predictions(predicted: &[Credibility], truth: &[Credibility]) -> Result<EvalReport> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid("prediction and truth lengths differ"));
    }
    if truth.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    let mut c = Confusion::default();
    for (p, t) in predicted.iter().zip(truth) {
        match (t, p) {
            (Credibility::Credible, Credibility::Credible) => c.true_credible += 1,
            (Credibility::Credible, Credibility::NonCredible) => c.false_noncredible += 1,
            (Credibility::NonCredible, Credibility::Credible) => c.false_credible += 1,
            (Credibility::NonCredible, Credibility::NonCredible) => c.true_noncredible += 1,
        }
    }
    let f1_credible = f1(c.true_credible, c.false_credible, c.false_noncredible);
    let f1_noncredible = f1(c.true_noncredible, c.false_noncredible, c.false_credible);
    Ok(EvalReport {
        accuracy_credible: ratio(c.true_credible, c.true_credible + c.false_noncredible),
        accuracy_noncredible: ratio(c.true_noncredible, c.true_noncredible + c.false_credible),
        accuracy_overall: ratio(c.true_credible + c.true_noncredible, c.total()),
        f1_macro: (f1_credible + f1_noncredible) / 2.0,
        f1_credible,
        f1_noncredible,
        confusion: c,
    })
}

pub fn evaluate(params: &HeadParams, test: &[Example]) -> Result<EvalReport> {
    let predicted = test.iter().map(|e| params.predict(e)).collect::<Result<Vec<_>>>()?;
    let truth: Vec<Credibility> = test.iter().map(|e| e.label).collect();
    evaluate_predictions(&predicted, &truth)
}

/// Always predicts the training set's majority class.
pub fn majority_predictions(train: &[Credibility], n: usize) -> Vec<Credibility> {
    let credible = train.iter().filter(|c| c.is_credible()).count();
    let majority = if 2 * credible >= train.len() {
        Credibility::Credible
    } else {
        Credibility::NonCredible
    };
    vec![majority; n]
}

/// A results-table row: model name, anchor use, per-class and overall
/// accuracy, macro F1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub anchor: bool,
    pub non_credible: f64,
    pub credible: f64,
    pub overall: f64,
    pub f1: f64,
}

impl EvalReport {
    pub fn table_row(&self, model: &str, anchor: bool) -> TableRow {
        let r3 = |x: f64| (x * 1000.0).round() / 1000.0;
        TableRow {
            model: model.to_string(),
            anchor,
            non_credible: r3(self.accuracy_noncredible),
            credible: r3(self.accuracy_credible),
            overall: r3(self.accuracy_overall),
            f1: r3(self.f1_macro),
        }
    }
}

/// Synthetic anchor benchmark.
///
/// Every event has a base vector and a large nuisance offset along a global
/// credibility direction; a submission's label moves it by
/// `global_signal` along that direction, optionally plus an event-specific
/// direction (`relative_signal`). A single branch sees the label blurred by
/// the offset. An anchor from the same event cancels base and offset, and
/// its score (kept away from the labeling threshold) says which side it is on.
/// Examples come in contiguous per-event blocks, so splitting the output
/// into contiguous ranges holds out whole events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorBenchSpec {
    pub examples: usize,
    pub events: usize,
    pub dim: usize,
    /// Length of each event's base vector.
    pub event_base: f64,
    pub global_signal: f64,
    pub relative_signal: f64,
    pub event_offset: f64,
    pub noise: f64,
    pub credible_rate: f64,
}

impl Default for AnchorBenchSpec {
    fn default() -> Self {
        AnchorBenchSpec {
            examples: 2000,
            events: 200,
            dim: 32,
            event_base: 1.0,
            global_signal: 1.5,
            relative_signal: 0.0,
            event_offset: 3.0,
            noise: 0.2,
            credible_rate: 0.5,
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
    let n = crate::nn::norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

pub fn anchor_benchmark(spec: &AnchorBenchSpec, seed: u64) -> Result<Vec<Example>> {
    if spec.examples == 0 || spec.events == 0 || spec.dim < 2 {
        return Err(Error::invalid("anchor benchmark needs examples, events and dim >= 2"));
    }
    let mut rng = rng::seeded(seed);
    let global = random_unit(&mut rng, spec.dim);
    let events: Vec<(Vec<f64>, f64, Vec<f64>)> = (0..spec.events)
        .map(|_| {
            let base = random_unit(&mut rng, spec.dim);
            let offset = spec.event_offset * standard_normal(&mut rng);
            let dir = random_unit(&mut rng, spec.dim);
            (base, offset, dir)
        })
        .collect();
    let noise_scale = spec.noise / (spec.dim as f64).sqrt();
    let draw = |rng: &mut rng::StageRng, e: usize, credible: bool| -> Vec<f64> {
        let (base, offset, dir) = &events[e];
        let y = if credible { 1.0 } else { -1.0 };
        (0..spec.dim)
            .map(|k| {
                spec.event_base * base[k]
                    + (offset + spec.global_signal * y) * global[k]
                    + spec.relative_signal * y * dir[k]
                    + noise_scale * standard_normal(rng)
            })
            .collect()
    };
    let mut out = Vec::with_capacity(spec.examples);
    for n in 0..spec.examples {
        let e = n * spec.events / spec.examples;
        let credible = rng.gen_bool(spec.credible_rate);
        let anchor_credible = rng.gen_bool(0.5);
        let embedding = draw(&mut rng, e, credible);
        let anchor_embedding = draw(&mut rng, e, anchor_credible);
        // Anchor scores keep a margin around the labeling threshold.
        let score = if anchor_credible {
            rng.gen_range(0.7..=1.0)
        } else {
            rng.gen_range(0.0..0.5)
        };
        out.push(Example {
            id: format!("b{n:05}"),
            embedding,
            anchor: Some(AnchorInput {
                id: format!("a{n:05}"),
                embedding: anchor_embedding,
                score,
            }),
            label: if credible {
                Credibility::Credible
            } else {
                Credibility::NonCredible
            },
        });
    }
    Ok(out)
}
