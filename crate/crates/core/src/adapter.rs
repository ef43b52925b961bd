//! Credibility-aware embedding adapter.
//!
//! A residual two-layer map over frozen base embeddings,
//! `C(e) = e + W2·tanh(W1·e + b1) + b2`, trained so that for every mined
//! pair the cosine of the transformed embeddings tracks `1 - c_ij`:
//!
//! ```text
//! L = mean over pairs of (cos(C(e_i), C(e_j)) - (1 - c_ij))²
//! ```
//!
//! Gradients are derived by hand; `max_relative_error` in [`crate::nn`] is
//! the finite-difference check used by the tests and the CLI.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::nn::{dot, norm, Adam, AdamConfig, Parameters};
use crate::pairing::SimilarPair;
use crate::rng;

pub const DEFAULT_HIDDEN: usize = 256;
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CRDB";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterParams {
    pub dim: usize,
    pub hidden: usize,
    /// `hidden × dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `dim × hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Parameters for AdapterParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

/// One training pair: two base embeddings and their credibility discrepancy.
#[derive(Clone, Copy, Debug)]
pub struct PairRef<'a> {
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub c_ij: f64,
}

struct Forward {
    act: Vec<f64>,
    out: Vec<f64>,
}

impl AdapterParams {
    /// All-zero parameters: the identity map.
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        AdapterParams {
            dim,
            hidden,
            w1: vec![0.0; hidden * dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; dim * hidden],
            b2: vec![0.0; dim],
        }
    }

    /// Weights uniform in ±1/√dim, biases zero.
    pub fn init(dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let limit = 1.0 / (dim as f64).sqrt();
        let mut p = Self::zeros(dim, hidden);
        p.w1.iter_mut().for_each(|w| *w = rng.gen_range(-limit..=limit));
        p.w2.iter_mut().for_each(|w| *w = rng.gen_range(-limit..=limit));
        p
    }

    fn check_dim(&self, e: &[f64]) -> Result<()> {
        if e.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: e.len(),
            });
        }
        Ok(())
    }

    fn forward(&self, e: &[f64]) -> Forward {
        let act: Vec<f64> = self
            .w1
            .chunks_exact(self.dim)
            .zip(&self.b1)
            .map(|(row, b)| (dot(row, e) + b).tanh())
            .collect();
        let out = self
            .w2
            .chunks_exact(self.hidden)
            .zip(&self.b2)
            .zip(e)
            .map(|((row, b), x)| x + dot(row, &act) + b)
            .collect();
        Forward { act, out }
    }

    /// The credibility-aware embedding `e + W2·tanh(W1·e + b1) + b2`.
    pub fn embed(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(e)?;
        Ok(self.forward(e).out)
    }

    /// Backpropagates `grad_out` (dL/dC) through one forward pass.
    fn backward(&self, e: &[f64], fwd: &Forward, grad_out: &[f64], grad: &mut AdapterParams) {
        let (d, h) = (self.dim, self.hidden);
        let mut grad_act = vec![0.0; h];
        for (i, &g) in grad_out.iter().enumerate() {
            grad.b2[i] += g;
            let row = &self.w2[i * h..(i + 1) * h];
            let grow = &mut grad.w2[i * h..(i + 1) * h];
            for k in 0..h {
                grow[k] += g * fwd.act[k];
                grad_act[k] += g * row[k];
            }
        }
        for k in 0..h {
            let gz = grad_act[k] * (1.0 - fwd.act[k] * fwd.act[k]);
            if gz == 0.0 {
                continue;
            }
            grad.b1[k] += gz;
            let grow = &mut grad.w1[k * d..(k + 1) * d];
            for (gw, x) in grow.iter_mut().zip(e) {
                *gw += gz * x;
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, CHECKPOINT_MAGIC, &[self.dim as u32, self.hidden as u32], self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p = checkpoint::load(path, CHECKPOINT_MAGIC, 2, |d| {
            Ok(Box::new(Self::zeros(d[0] as usize, d[1] as usize)))
        })?;
        Ok(*p)
    }
}

/// Distinct input slices of a batch (by address) and each pair's indices
/// into them, so shared embeddings are transformed once per batch.
fn unique_inputs<'a>(params: &AdapterParams, batch: &[PairRef<'a>]) -> Result<(Vec<&'a [f64]>, Vec<(usize, usize)>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut seen: HashMap<*const f64, usize> = HashMap::new();
    let mut inputs = Vec::new();
    let mut index = |x: &'a [f64]| -> Result<usize> {
        params.check_dim(x)?;
        Ok(*seen.entry(x.as_ptr()).or_insert_with(|| {
            inputs.push(x);
            inputs.len() - 1
        }))
    };
    let mut pairs = Vec::with_capacity(batch.len());
    for pair in batch {
        if !(0.0..=1.0).contains(&pair.c_ij) {
            return Err(Error::invalid(format!("c_ij {} outside [0, 1]", pair.c_ij)));
        }
        pairs.push((index(pair.a)?, index(pair.b)?));
    }
    Ok((inputs, pairs))
}

fn forward_all(params: &AdapterParams, inputs: &[&[f64]]) -> Result<Vec<(Forward, f64)>> {
    inputs
        .iter()
        .map(|x| {
            let f = params.forward(x);
            let n = norm(&f.out);
            if n == 0.0 {
                return Err(Error::numeric("transformed embedding has zero norm"));
            }
            Ok((f, n))
        })
        .collect()
}

/// Mean squared gap between transformed cosine and `1 - c_ij`.
pub fn pair_loss(params: &AdapterParams, batch: &[PairRef]) -> Result<f64> {
    let (inputs, idx) = unique_inputs(params, batch)?;
    let fwd = forward_all(params, &inputs)?;
    let mut total = 0.0;
    for (pair, &(a, b)) in batch.iter().zip(&idx) {
        let ((fa, na), (fb, nb)) = (&fwd[a], &fwd[b]);
        let resid = dot(&fa.out, &fb.out) / (na * nb) - (1.0 - pair.c_ij);
        total += resid * resid;
    }
    Ok(total / batch.len() as f64)
}

/// Loss and its exact gradient with respect to every parameter.
pub fn pair_loss_grad(params: &AdapterParams, batch: &[PairRef]) -> Result<(f64, AdapterParams)> {
    let (inputs, idx) = unique_inputs(params, batch)?;
    let fwd = forward_all(params, &inputs)?;
    let scale = 1.0 / batch.len() as f64;
    let mut grad_out = vec![vec![0.0; params.dim]; inputs.len()];
    let mut total = 0.0;
    for (pair, &(a, b)) in batch.iter().zip(&idx) {
        let ((fa, na), (fb, nb)) = (&fwd[a], &fwd[b]);
        let (na, nb) = (*na, *nb);
        let cos = dot(&fa.out, &fb.out) / (na * nb);
        let resid = cos - (1.0 - pair.c_ij);
        total += resid * resid;
        let g = 2.0 * resid * scale;
        // d cos / d a = b / (|a||b|) - cos · a / |a|²
        for k in 0..params.dim {
            let (x, y) = (fa.out[k], fb.out[k]);
            grad_out[a][k] += g * (y / (na * nb) - cos * x / (na * na));
            grad_out[b][k] += g * (x / (na * nb) - cos * y / (nb * nb));
        }
    }
    let mut grad = AdapterParams::zeros(params.dim, params.hidden);
    for ((x, (f, _)), go) in inputs.iter().zip(&fwd).zip(&grad_out) {
        params.backward(x, f, go, &mut grad);
    }
    Ok((total * scale, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 256,
            seed: 0,
            patience: 5,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::Config(
                "learning rate, batch size and hidden size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub initial_train_loss: f64,
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
    /// 0 when the initial parameters were never beaten.
    pub best_epoch: usize,
}

impl LossReport {
    /// `epoch,train_loss,val_loss` rows. Wall time is left out so the file is
    /// reproducible.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
        }
        s
    }

    /// Equality ignoring wall time.
    pub fn same_trajectory(&self, other: &LossReport) -> bool {
        self.initial_train_loss.to_bits() == other.initial_train_loss.to_bits()
            && self.initial_val_loss.to_bits() == other.initial_val_loss.to_bits()
            && self.best_epoch == other.best_epoch
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.val_loss.to_bits() == b.val_loss.to_bits()
            })
    }
}

/// Base vectors for the pairs, resolved once.
pub struct PairSet {
    vectors: Vec<Vec<f64>>,
    pairs: Vec<(usize, usize, f64)>,
}

impl PairSet {
    pub fn from_store(pairs: &[SimilarPair], store: &EmbeddingStore) -> Result<Self> {
        let mut ids: Vec<&str> = pairs.iter().flat_map(|p| [p.i.as_str(), p.j.as_str()]).collect();
        ids.sort_unstable();
        ids.dedup();
        let missing = store.missing(ids.iter().copied());
        if !missing.is_empty() {
            return Err(Error::MissingEmbeddings(missing));
        }
        let vectors: Vec<Vec<f64>> = ids.iter().map(|id| store.get(id).unwrap_or_default()).collect();
        let pos = |id: &str| ids.binary_search(&id).expect("collected above");
        let pairs = pairs
            .iter()
            .map(|p| {
                let c = p
                    .c_ij
                    .ok_or_else(|| Error::invalid(format!("pair ({}, {}) has no c_ij", p.i, p.j)))?;
                Ok((pos(&p.i), pos(&p.j), c))
            })
            .collect::<Result<_>>()?;
        Ok(PairSet { vectors, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn refs(&self) -> Vec<PairRef<'_>> {
        self.pairs
            .iter()
            .map(|&(a, b, c)| PairRef {
                a: &self.vectors[a],
                b: &self.vectors[b],
                c_ij: c,
            })
            .collect()
    }
}

/// Mini-batch Adam on the pair loss with early stopping; returns the
/// parameters with the best validation loss (initial parameters included).
pub fn train_adapter(
    train: &[SimilarPair],
    val: &[SimilarPair],
    store: &EmbeddingStore,
    config: &TrainConfig,
) -> Result<(AdapterParams, LossReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("empty adapter training set"));
    }
    let train_set = PairSet::from_store(train, store)?;
    let val_set = PairSet::from_store(val, store)?;
    train_on(&train_set, &val_set, store.dim(), config)
}

pub fn train_on(
    train_set: &PairSet,
    val_set: &PairSet,
    dim: usize,
    config: &TrainConfig,
) -> Result<(AdapterParams, LossReport)> {
    config.validate()?;
    let train_refs = train_set.refs();
    if train_refs.is_empty() {
        return Err(Error::invalid("empty adapter training set"));
    }
    let val_refs = val_set.refs();
    let select = |p: &AdapterParams, train_loss: f64| -> Result<f64> {
        if val_refs.is_empty() {
            Ok(train_loss)
        } else {
            pair_loss(p, &val_refs)
        }
    };

    let mut params = AdapterParams::init(dim, config.hidden, rng::substream_seed(config.seed, "adapter/init"));
    let initial_train_loss = pair_loss(&params, &train_refs)?;
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
    let mut shuffle_rng = rng::substream(config.seed, "adapter/shuffle");
    let mut order: Vec<usize> = (0..train_refs.len()).collect();
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<PairRef> = chunk.iter().map(|&k| train_refs[k]).collect();
            let (_, grad) = pair_loss_grad(&params, &batch)?;
            opt.step(&mut params, &grad);
        }
        if !params.all_finite() {
            return Err(Error::numeric(format!("adapter parameters diverged at epoch {epoch}")));
        }
        let train_loss = pair_loss(&params, &train_refs)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::max_relative_error;
    use crate::rng::seeded;

    fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn random_params(d: usize, h: usize, seed: u64) -> AdapterParams {
        let mut rng = seeded(seed);
        let mut p = AdapterParams::zeros(d, h);
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|x| *x = rng.gen_range(-0.5..0.5));
        }
        p
    }

    #[test]
    fn zero_params_are_identity() {
        let p = AdapterParams::zeros(4, 3);
        let e = [0.1, -2.0, 3.5, 0.0];
        assert_eq!(p.embed(&e).unwrap(), e.to_vec());
        assert!(matches!(p.embed(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_init_loss_equals_raw_cosine_loss() {
        let mut rng = seeded(2);
        let (a, b) = (random_vec(&mut rng, 6), random_vec(&mut rng, 6));
        let raw = crate::embedding::cosine(&a, &b).unwrap();
        let p = AdapterParams::zeros(6, 4);
        let l = pair_loss(&p, &[PairRef { a: &a, b: &b, c_ij: 0.3 }]).unwrap();
        assert!((l - (raw - 0.7).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn loss_examples() {
        let p = AdapterParams::zeros(3, 2);
        let e = [1.0, 2.0, 3.0];
        assert_eq!(pair_loss(&p, &[PairRef { a: &e, b: &e, c_ij: 0.0 }]).unwrap(), 0.0);
        let l = pair_loss(&p, &[PairRef { a: &e, b: &e, c_ij: 1.0 }]).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        // cos((1,0),(0.8,0.6)) = 0.8 against target 1 - 0.2.
        let p2 = AdapterParams::zeros(2, 1);
        let l = pair_loss(&p2, &[PairRef { a: &[1.0, 0.0], b: &[0.8, 0.6], c_ij: 0.2 }]).unwrap();
        assert!(l < 1e-30);
        assert!(pair_loss(&p2, &[]).is_err());
        assert!(pair_loss(&p2, &[PairRef { a: &[0.0, 0.0], b: &[1.0, 0.0], c_ij: 0.2 }]).is_err());
    }

    #[test]
    fn deterministic_forward() {
        let p = random_params(8, 5, 4);
        let e: Vec<f64> = (0..8).map(|k| k as f64 / 7.0 - 0.5).collect();
        assert_eq!(p.embed(&e).unwrap(), p.clone().embed(&e).unwrap());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (d, h) = (16, 8);
        for seed in 0..3 {
            let params = random_params(d, h, 100 + seed);
            let mut rng = seeded(200 + seed);
            let data: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..4)
                .map(|_| (random_vec(&mut rng, d), random_vec(&mut rng, d), rng.gen_range(0.0..1.0)))
                .collect();
            let batch: Vec<PairRef> = data.iter().map(|(a, b, c)| PairRef { a, b, c_ij: *c }).collect();
            let (_, grad) = pair_loss_grad(&params, &batch).unwrap();
            let err = max_relative_error(&params, &grad, 1e-5, 1e-5, |p| pair_loss(p, &batch).unwrap());
            assert!(err < 1e-5, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn gradient_vanishes_at_perfect_fit() {
        let p = random_params(5, 3, 9);
        let a = [0.3, 0.1, -0.2, 0.5, 0.9];
        let b = [-0.1, 0.4, 0.2, 0.5, -0.3];
        let cos = crate::embedding::cosine(&p.embed(&a).unwrap(), &p.embed(&b).unwrap()).unwrap();
        let c = 1.0 - cos;
        assert!((0.0..=1.0).contains(&c));
        let (loss, grad) = pair_loss_grad(&p, &[PairRef { a: &a, b: &b, c_ij: c }]).unwrap();
        assert!(loss < 1e-28);
        assert!(grad.tensors().iter().flat_map(|t| t.iter()).all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn batch_gradient_is_mean_of_pair_gradients() {
        let p = random_params(6, 4, 1);
        let mut rng = seeded(8);
        let data: Vec<(Vec<f64>, Vec<f64>, f64)> =
            (0..3).map(|_| (random_vec(&mut rng, 6), random_vec(&mut rng, 6), 0.4)).collect();
        let batch: Vec<PairRef> = data.iter().map(|(a, b, c)| PairRef { a, b, c_ij: *c }).collect();
        let (_, full) = pair_loss_grad(&p, &batch).unwrap();
        let mut mean = AdapterParams::zeros(6, 4);
        for pair in &batch {
            let (_, g) = pair_loss_grad(&p, std::slice::from_ref(pair)).unwrap();
            for (m, t) in mean.tensors_mut().into_iter().zip(g.tensors()) {
                m.iter_mut().zip(t).for_each(|(m, x)| *m += x / 3.0);
            }
        }
        for (a, b) in full.tensors().iter().zip(mean.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn loss_is_bounded() {
        let p = random_params(4, 3, 2);
        let mut rng = seeded(3);
        for _ in 0..200 {
            let (a, b) = (random_vec(&mut rng, 4), random_vec(&mut rng, 4));
            let l = pair_loss(&p, &[PairRef { a: &a, b: &b, c_ij: rng.gen_range(0.0..=1.0) }]).unwrap();
            assert!((0.0..=4.0).contains(&l));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.crdb");
        let p = random_params(5, 3, 1);
        p.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"CRDB");
        assert_eq!(bytes.len(), 16 + 8 * (15 + 3 + 15 + 5));
        assert_eq!(AdapterParams::load(&path).unwrap(), p);
        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(AdapterParams::load(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let mut store = EmbeddingStore::new(8);
        store.insert("a", &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        store.insert("b", &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let pairs = vec![SimilarPair {
            i: "a".into(),
            j: "b".into(),
            similarity: 0.7,
            c_ij: Some(0.1),
            dt: 0,
        }];
        let cfg = TrainConfig {
            epochs: 0,
            hidden: 4,
            seed: 5,
            ..Default::default()
        };
        let (p, report) = train_adapter(&pairs, &[], &store, &cfg).unwrap();
        assert!(report.epochs.is_empty());
        assert_eq!(p, AdapterParams::init(8, 4, rng::substream_seed(5, "adapter/init")));
        assert!(train_adapter(&[], &[], &store, &cfg).is_err());
    }
}
