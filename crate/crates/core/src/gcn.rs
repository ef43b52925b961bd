//! Two-layer graph convolutional network over the post-to-post graph.
//!
//! `P = softmax(Â · ReLU(Â · X · W0) · W1)` with
//! `Â = D̃^{-1/2} (A + I) D̃^{-1/2}` and `D̃_ii = 1 + Σ_j |A_ij|`. Signed
//! weights stay in `A`; only the degrees use magnitudes. No bias terms.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adapter::{EpochRecord, LossReport};
use crate::checkpoint;
use crate::classifier::{evaluate_predictions, random_unit, EvalReport};
use crate::corpus::{split_ids, Credibility};
use crate::error::{Error, Result};
use crate::nn::{cross_entropy, softmax, Adam, AdamConfig, Dense, Parameters};
use crate::p2pnet::{Edge, Node, P2PGraph};
use crate::rng;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GCN1";
pub const DEFAULT_HIDDEN: usize = 64;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: bad.len(),
            });
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a != 0.0 {
                    for (d, b) in dst.iter_mut().zip(other.row(k)) {
                        *d += a * b;
                    }
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows);
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            for (k, &a) in self.row(r).iter().enumerate() {
                if a != 0.0 {
                    let dst = &mut out.data[k * other.cols..(k + 1) * other.cols];
                    for (d, b) in dst.iter_mut().zip(other.row(r)) {
                        *d += a * b;
                    }
                }
            }
        }
        out
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols);
        let mut out = Matrix::zeros(self.rows, other.rows);
        for r in 0..self.rows {
            for c in 0..other.rows {
                out.data[r * other.rows + c] = crate::nn::dot(self.row(r), other.row(c));
            }
        }
        out
    }
}

/// `Â` in compressed sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl NormalizedAdjacency {
    /// From undirected weighted edges `(i, j, w)` over `n` nodes.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut degree = vec![1.0; n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::invalid(format!("bad edge ({i}, {j}) for {n} nodes")));
            }
            adj[i].push((j, w));
            adj[j].push((i, w));
            degree[i] += w.abs();
            degree[j] += w.abs();
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (i, row) in adj.iter_mut().enumerate() {
            row.push((i, 1.0));
            row.sort_by_key(|x| x.0);
            for &(j, w) in row.iter() {
                // Parallel duplicates are summed by consecutive pushes.
                if cols.len() > row_ptr[i] && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += w / (degree[i] * degree[j]).sqrt();
                } else {
                    cols.push(j);
                    vals.push(w / (degree[i] * degree[j]).sqrt());
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(NormalizedAdjacency { n, row_ptr, cols, vals })
    }

    pub fn from_graph(graph: &P2PGraph) -> Result<Self> {
        let edges: Vec<(usize, usize, f64)> = graph.edges.iter().map(|e| (e.i, e.j, e.weight)).collect();
        Self::from_edges(graph.nodes.len(), &edges)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m.data[i * self.n + self.cols[k]] = self.vals[k];
            }
        }
        m
    }

    /// `Â · x`.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows, self.n);
        let mut out = Matrix::zeros(self.n, x.cols);
        for i in 0..self.n {
            let dst = &mut out.data[i * x.cols..(i + 1) * x.cols];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.vals[k];
                for (d, v) in dst.iter_mut().zip(x.row(self.cols[k])) {
                    *d += a * v;
                }
            }
        }
        out
    }

    /// Largest eigenvalue magnitude by power iteration.
    pub fn spectral_radius(&self, iterations: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let mut v = Matrix {
            rows: self.n,
            cols: 1,
            data: (0..self.n).map(|k| 1.0 + (k as f64 * 0.618).fract()).collect(),
        };
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let w = self.apply(&v);
            let nw = crate::nn::norm(&w.data);
            if nw == 0.0 {
                return 0.0;
            }
            lambda = nw / crate::nn::norm(&v.data);
            v = Matrix {
                data: w.data.iter().map(|x| x / nw).collect(),
                ..w
            };
        }
        lambda
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    /// `d × h`.
    pub w0: Matrix,
    /// `h × 2`.
    pub w1: Matrix,
}

impl Parameters for GcnParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.w0.data, &self.w1.data]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w0.data, &mut self.w1.data]
    }
}

impl GcnParams {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        GcnParams {
            w0: Matrix::zeros(dim, hidden),
            w1: Matrix::zeros(hidden, 2),
        }
    }

    /// Glorot-uniform initialization.
    pub fn init(dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let d = Dense::glorot(rows, cols, &mut rng);
            Matrix {
                rows,
                cols,
                data: d.w,
            }
        };
        GcnParams {
            w0: glorot(dim, hidden),
            w1: glorot(hidden, 2),
        }
    }

    pub fn dim(&self) -> usize {
        self.w0.rows
    }

    pub fn hidden(&self) -> usize {
        self.w0.cols
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, CHECKPOINT_MAGIC, &[self.dim() as u32, self.hidden() as u32], self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(*checkpoint::load(path, CHECKPOINT_MAGIC, 2, |d| {
            Ok(Box::new(GcnParams::zeros(d[0] as usize, d[1] as usize)))
        })?)
    }
}

struct Forward {
    z1: Matrix,
    ah: Matrix,
    probs: Matrix,
}

fn check_shapes(adj: &NormalizedAdjacency, x: &Matrix, params: &GcnParams) -> Result<()> {
    if x.rows != adj.n {
        return Err(Error::DimensionMismatch {
            expected: adj.n,
            got: x.rows,
        });
    }
    if x.cols != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: x.cols,
        });
    }
    Ok(())
}

fn forward_cached(adj: &NormalizedAdjacency, ax: &Matrix, params: &GcnParams) -> Forward {
    let z1 = ax.matmul(&params.w0);
    let h = Matrix {
        data: z1.data.iter().map(|v| v.max(0.0)).collect(),
        ..z1.clone()
    };
    let ah = adj.apply(&h);
    let logits = ah.matmul(&params.w1);
    let mut probs = Matrix::zeros(logits.rows, 2);
    for r in 0..logits.rows {
        probs.data[2 * r..2 * r + 2].copy_from_slice(&softmax(logits.row(r)));
    }
    Forward { z1, ah, probs }
}

/// Per-node class probabilities (`n × 2`, column 1 = credible).
pub fn gcn_forward(adj: &NormalizedAdjacency, x: &Matrix, params: &GcnParams) -> Result<Matrix> {
    check_shapes(adj, x, params)?;
    Ok(forward_cached(adj, &adj.apply(x), params).probs)
}

fn masked_loss(probs: &Matrix, labels: &[Option<Credibility>], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &k in mask {
        let y = labels[k].ok_or_else(|| Error::invalid(format!("masked node {k} has no label")))?;
        total -= probs.data[2 * k + y.class()].max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / mask.len() as f64)
}

/// Mean cross-entropy over `mask` and its gradient.
pub fn masked_loss_grad(
    adj: &NormalizedAdjacency,
    x: &Matrix,
    params: &GcnParams,
    labels: &[Option<Credibility>],
    mask: &[usize],
) -> Result<(f64, GcnParams)> {
    check_shapes(adj, x, params)?;
    loss_grad_cached(adj, &adj.apply(x), params, labels, mask)
}

fn loss_grad_cached(
    adj: &NormalizedAdjacency,
    ax: &Matrix,
    params: &GcnParams,
    labels: &[Option<Credibility>],
    mask: &[usize],
) -> Result<(f64, GcnParams)> {
    let f = forward_cached(adj, ax, params);
    let logits = f.ah.matmul(&params.w1);
    let scale = 1.0 / mask.len().max(1) as f64;
    let mut g = Matrix::zeros(adj.n, 2);
    let mut loss = 0.0;
    for &k in mask {
        let y = labels[k]
            .ok_or_else(|| Error::invalid(format!("masked node {k} has no label")))?
            .class();
        loss += cross_entropy(logits.row(k), y) * scale;
        for c in 0..2 {
            let t = if c == y { 1.0 } else { 0.0 };
            g.data[2 * k + c] += (f.probs.data[2 * k + c] - t) * scale;
        }
    }
    let d_w1 = f.ah.t_matmul(&g);
    let d_ah = g.matmul_t(&params.w1);
    // Â is symmetric, so Âᵀ · d_ah = Â · d_ah.
    let mut d_z1 = adj.apply(&d_ah);
    for (d, z) in d_z1.data.iter_mut().zip(&f.z1.data) {
        if *z <= 0.0 {
            *d = 0.0;
        }
    }
    let d_w0 = ax.t_matmul(&d_z1);
    Ok((loss, GcnParams { w0: d_w0, w1: d_w1 }))
}

/// Node index sets for training, model selection and testing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Masks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits labeled nodes by the given ratios.
pub fn node_masks(nodes: &[Node], ratios: [f64; 3], seed: u64) -> Result<Masks> {
    let ids: Vec<String> = nodes.iter().filter(|n| n.label.is_some()).map(|n| n.id.clone()).collect();
    let split = split_ids(ids, ratios, seed)?;
    let index = |ids: Vec<String>| -> Vec<usize> {
        let mut v: Vec<usize> = ids
            .iter()
            .map(|id| nodes.iter().position(|n| &n.id == id).expect("id from nodes"))
            .collect();
        v.sort_unstable();
        v
    };
    Ok(Masks {
        train: index(split.train),
        val: index(split.validation),
        test: index(split.test),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            hidden: DEFAULT_HIDDEN,
            learning_rate: 1e-2,
            epochs: 200,
            patience: 20,
            seed: 0,
        }
    }
}

/// Full-batch Adam on the masked cross-entropy; returns the parameters with
/// the lowest validation loss (training loss when the validation mask is
/// empty).
pub fn gcn_train(
    adj: &NormalizedAdjacency,
    x: &Matrix,
    labels: &[Option<Credibility>],
    masks: &Masks,
    config: &GcnConfig,
) -> Result<(GcnParams, LossReport)> {
    if labels.len() != adj.n {
        return Err(Error::DimensionMismatch {
            expected: adj.n,
            got: labels.len(),
        });
    }
    if config.hidden == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::Config("GCN hidden size and learning rate must be positive".into()));
    }
    let classes: Vec<Credibility> = masks.train.iter().filter_map(|&k| labels.get(k).copied().flatten()).collect();
    if classes.len() != masks.train.len() {
        return Err(Error::invalid("training mask contains unlabeled nodes"));
    }
    if classes.is_empty() || classes.iter().all(|&c| c == classes[0]) {
        return Err(Error::invalid("training mask has a single class; cannot train a classifier"));
    }
    let mut params = GcnParams::init(x.cols, config.hidden, rng::substream_seed(config.seed, "gcn/init"));
    check_shapes(adj, x, &params)?;
    let ax = adj.apply(x);

    let eval = |p: &GcnParams| -> Result<(f64, f64)> {
        let probs = forward_cached(adj, &ax, p).probs;
        let train = masked_loss(&probs, labels, &masks.train)?;
        let val = if masks.val.is_empty() {
            train
        } else {
            masked_loss(&probs, labels, &masks.val)?
        };
        Ok((train, val))
    };
    let (initial_train_loss, initial_val_loss) = eval(&params)?;
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
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let (_, grad) = loss_grad_cached(adj, &ax, &params, labels, &masks.train)?;
        opt.step(&mut params, &grad);
        if !params.all_finite() {
            return Err(Error::numeric(format!("GCN parameters diverged at epoch {epoch}")));
        }
        let (train_loss, val_loss) = eval(&params)?;
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

/// Metrics on the nodes in `mask`.
pub fn gcn_evaluate(
    adj: &NormalizedAdjacency,
    x: &Matrix,
    params: &GcnParams,
    labels: &[Option<Credibility>],
    mask: &[usize],
) -> Result<EvalReport> {
    let probs = gcn_forward(adj, x, params)?;
    let mut pred = Vec::with_capacity(mask.len());
    let mut truth = Vec::with_capacity(mask.len());
    for &k in mask {
        let y = labels[k].ok_or_else(|| Error::invalid(format!("masked node {k} has no label")))?;
        truth.push(y);
        pred.push(if probs.data[2 * k + 1] >= 0.5 {
            Credibility::Credible
        } else {
            Credibility::NonCredible
        });
    }
    evaluate_predictions(&pred, &truth)
}

/// Two-community planted partition with class-correlated node features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub nodes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub dim: usize,
    /// Distance of each class mean from the origin along a shared direction.
    pub feature_signal: f64,
    /// Per-coordinate noise standard deviation.
    pub feature_noise: f64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            nodes: 200,
            p_in: 0.08,
            p_out: 0.005,
            dim: 16,
            feature_signal: 1.0,
            feature_noise: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedGraph {
    pub graph: P2PGraph,
    pub features: Matrix,
    pub labels: Vec<Option<Credibility>>,
}

/// Node `k` belongs to class `k % 2`; edge weights are uniform in
/// `[0.1, 1]`.
pub fn planted_partition(spec: &PlantedSpec, seed: u64) -> Result<PlantedGraph> {
    if spec.nodes < 2 || spec.dim == 0 {
        return Err(Error::invalid("planted partition needs at least 2 nodes and dim >= 1"));
    }
    let mut rng = rng::seeded(seed);
    let labels: Vec<Option<Credibility>> = (0..spec.nodes).map(|k| Some(Credibility::from_class(k % 2))).collect();
    let nodes: Vec<Node> = (0..spec.nodes)
        .map(|k| Node {
            id: format!("n{k:05}"),
            subreddit: format!("c{}", k % 2),
            label: labels[k],
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..spec.nodes {
        for j in i + 1..spec.nodes {
            let p = if i % 2 == j % 2 { spec.p_in } else { spec.p_out };
            if rng.gen_bool(p) {
                edges.push(Edge {
                    i,
                    j,
                    weight: rng.gen_range(0.1..=1.0),
                    common: 2,
                });
            }
        }
    }
    let direction = random_unit(&mut rng, spec.dim);
    let normal = rand_distr::Normal::new(0.0, spec.feature_noise.max(0.0))
        .map_err(|e| Error::invalid(format!("feature noise: {e}")))?;
    let mut features = Matrix::zeros(spec.nodes, spec.dim);
    for k in 0..spec.nodes {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        for c in 0..spec.dim {
            features.data[k * spec.dim + c] =
                sign * spec.feature_signal * direction[c] + rand_distr::Distribution::sample(&normal, &mut rng);
        }
    }
    Ok(PlantedGraph {
        graph: P2PGraph { nodes, edges },
        features,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::max_relative_error;
    use crate::rng::seeded;

    fn random_graph(n: usize, p: f64, signed: bool, seed: u64) -> Vec<(usize, usize, f64)> {
        let mut rng = seeded(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    let w: f64 = rng.gen_range(0.1..2.0);
                    edges.push((i, j, if signed && rng.gen_bool(0.4) { -w } else { w }));
                }
            }
        }
        edges
    }

    #[test]
    fn normalization_examples() {
        let a = NormalizedAdjacency::from_edges(1, &[]).unwrap();
        assert_eq!(a.to_dense().data, vec![1.0]);
        let a = NormalizedAdjacency::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(a.to_dense().data, vec![0.5, 0.5, 0.5, 0.5]);
        // An isolated node keeps a pure self-loop.
        let a = NormalizedAdjacency::from_edges(3, &[(0, 1, 2.0)]).unwrap();
        assert_eq!(a.get(2, 2), 1.0);
        assert!(NormalizedAdjacency::from_edges(2, &[(0, 0, 1.0)]).is_err());
    }

    #[test]
    fn signed_normalization_is_symmetric_with_positive_degrees() {
        for seed in 0..5 {
            let edges = random_graph(30, 0.2, true, seed);
            let a = NormalizedAdjacency::from_edges(30, &edges).unwrap().to_dense();
            for i in 0..30 {
                assert!(a.data[i * 30 + i] > 0.0);
                for j in 0..30 {
                    assert!((a.data[i * 30 + j] - a.data[j * 30 + i]).abs() <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn spectral_radius_of_positive_graph_is_at_most_one() {
        for seed in 0..10 {
            let n = 12;
            let edges = random_graph(n, 0.4, false, seed);
            let a = NormalizedAdjacency::from_edges(n, &edges).unwrap();
            let rho = a.spectral_radius(2000);
            assert!(rho <= 1.0 + 1e-9, "seed {seed}: {rho}");
        }
    }

    #[test]
    fn zero_output_layer_gives_uniform_probabilities() {
        let adj = NormalizedAdjacency::from_edges(4, &[]).unwrap();
        let mut x = Matrix::zeros(4, 3);
        x.data.iter_mut().enumerate().for_each(|(k, v)| *v = k as f64 * 0.1);
        let mut p = GcnParams::init(3, 5, 1);
        p.w1 = Matrix::zeros(5, 2);
        let probs = gcn_forward(&adj, &x, &p).unwrap();
        assert!(probs.data.iter().all(|&v| v == 0.5));
        assert!(gcn_forward(&adj, &Matrix::zeros(4, 2), &p).is_err());
        assert!(gcn_forward(&adj, &Matrix::zeros(3, 3), &p).is_err());
    }

    fn tiny(seed: u64) -> (NormalizedAdjacency, Matrix, Vec<Option<Credibility>>, GcnParams) {
        let mut rng = seeded(seed);
        let adj = NormalizedAdjacency::from_edges(6, &random_graph(6, 0.5, true, seed)).unwrap();
        let mut x = Matrix::zeros(6, 8);
        x.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let labels = (0..6).map(|k| Some(Credibility::from_class(k % 2))).collect();
        (adj, x, labels, GcnParams::init(8, 4, seed + 100))
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let (adj, x, labels, params) = tiny(seed);
            let mask = [0, 1, 3, 4];
            let (_, grad) = masked_loss_grad(&adj, &x, &params, &labels, &mask).unwrap();
            let err = max_relative_error(&params, &grad, 1e-6, 1e-5, |p| {
                masked_loss(&gcn_forward(&adj, &x, p).unwrap(), &labels, &mask).unwrap()
            });
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn loss_ignores_unmasked_labels() {
        let (adj, x, mut labels, params) = tiny(3);
        let mask = [0, 1, 2];
        let before = masked_loss_grad(&adj, &x, &params, &labels, &mask).unwrap().0;
        labels[5] = Some(Credibility::from_class(1 - labels[5].unwrap().class()));
        assert_eq!(masked_loss_grad(&adj, &x, &params, &labels, &mask).unwrap().0, before);
    }

    #[test]
    fn forward_is_permutation_equivariant() {
        let mut rng = seeded(8);
        let n = 8;
        let edges = random_graph(n, 0.4, true, 8);
        let mut x = Matrix::zeros(n, 5);
        x.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let params = GcnParams::init(5, 6, 2);
        let base = gcn_forward(&NormalizedAdjacency::from_edges(n, &edges).unwrap(), &x, &params).unwrap();

        let perm = [3, 7, 0, 5, 1, 6, 2, 4];
        let pedges: Vec<_> = edges.iter().map(|&(i, j, w)| (perm[i], perm[j], w)).collect();
        let mut px = Matrix::zeros(n, 5);
        for k in 0..n {
            px.data[perm[k] * 5..perm[k] * 5 + 5].copy_from_slice(x.row(k));
        }
        let out = gcn_forward(&NormalizedAdjacency::from_edges(n, &pedges).unwrap(), &px, &params).unwrap();
        for k in 0..n {
            for c in 0..2 {
                assert!((out.data[2 * perm[k] + c] - base.data[2 * k + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trains_on_planted_partition() {
        let pg = planted_partition(&PlantedSpec::default(), 4).unwrap();
        let adj = NormalizedAdjacency::from_graph(&pg.graph).unwrap();
        let masks = node_masks(&pg.graph.nodes, [0.8, 0.1, 0.1], 5).unwrap();
        let cfg = GcnConfig {
            seed: 6,
            ..Default::default()
        };
        let (params, report) = gcn_train(&adj, &pg.features, &pg.labels, &masks, &cfg).unwrap();
        let r = gcn_evaluate(&adj, &pg.features, &params, &pg.labels, &masks.test).unwrap();
        assert!(r.accuracy_overall >= 0.9, "{r:?}");
        let (again, report2) = gcn_train(&adj, &pg.features, &pg.labels, &masks, &cfg).unwrap();
        assert_eq!(params, again);
        assert!(report.same_trajectory(&report2));
    }

    #[test]
    fn zero_epochs_return_initial_params_and_single_class_fails() {
        let (adj, x, labels, _) = tiny(1);
        let masks = Masks {
            train: vec![0, 1, 2, 3],
            val: vec![4],
            test: vec![5],
        };
        let cfg = GcnConfig {
            hidden: 4,
            epochs: 0,
            seed: 2,
            ..Default::default()
        };
        let (p, r) = gcn_train(&adj, &x, &labels, &masks, &cfg).unwrap();
        assert_eq!(p, GcnParams::init(8, 4, rng::substream_seed(2, "gcn/init")));
        assert!(r.epochs.is_empty());
        let single = Masks {
            train: vec![0, 2, 4],
            ..masks
        };
        assert!(gcn_train(&adj, &x, &labels, &single, &cfg).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bin");
        let p = GcnParams::init(7, 3, 9);
        p.save(&path).unwrap();
        assert_eq!(GcnParams::load(&path).unwrap(), p);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"GCN1");
        assert_eq!(bytes.len(), 16 + 8 * (7 * 3 + 3 * 2));
    }
}
