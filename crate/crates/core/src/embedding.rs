//! Text embeddings: cosine similarity, a deterministic hashed-token provider
//! for offline runs, and the `EMBS` binary store.
//!
//! Store layout (little-endian, no padding):
//!
//! ```text
//! magic "EMBS" | version u32 = 1 | dim u32 | count u64
//! count × ( id_len u16 | id bytes (UTF-8) | dim × f32 )
//! ```
//!
//! Vectors are kept as `f32` exactly as stored so a load/save cycle is
//! byte-identical; arithmetic widens to `f64`.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{dot, norm};
use crate::rng::{fnv1a64, splitmix64};

pub const DEFAULT_DIM: usize = 768;
pub const STORE_MAGIC: &[u8; 4] = b"EMBS";
pub const STORE_VERSION: u32 = 1;

/// Cosine similarity, clamped to [-1, 1]. Zero-norm inputs are an error.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    cosine_with_norms(u, v, norm(u), norm(v))
}

/// Cosine given precomputed norms; bit-identical to [`cosine`] when the
/// norms were produced by [`norm`].
pub fn cosine_with_norms(u: &[f64], v: &[f64], nu: f64, nv: f64) -> Result<f64> {
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::numeric("cosine of a zero-norm vector"));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Maps texts to fixed-dimension vectors. Equal texts give equal vectors.
pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Resolves the vector of a text unit identified by id (and its text, for
/// providers that embed on the fly).
pub trait VectorSource: Sync {
    fn dim(&self) -> usize;
    fn vector(&self, id: &str, text: &str) -> Result<Cow<'_, [f64]>>;
}

/// Bag-of-tokens provider: each whitespace token hashes (FNV-1a XOR seed) to
/// a pseudo-random Gaussian unit vector; the text vector is the normalized
/// mean of its token vectors.
#[derive(Clone, Debug)]
pub struct SyntheticProvider {
    pub dim: usize,
    pub seed: u64,
}

impl SyntheticProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 8 {
            return Err(Error::invalid(format!("synthetic embedding dim must be >= 8, got {dim}")));
        }
        Ok(SyntheticProvider { dim, seed })
    }

    /// Unit Gaussian vector for one token via SplitMix64 + Box–Muller, so the
    /// output is reproducible in any language.
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut state = fnv1a64(token.as_bytes()) ^ self.seed;
        let mut next_unit = || {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            // 53 random bits into (0, 1].
            ((splitmix64(state) >> 11) as f64 + 1.0) / (1u64 << 53) as f64
        };
        let mut v = Vec::with_capacity(self.dim);
        while v.len() < self.dim {
            let (u1, u2) = (next_unit(), next_unit());
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = 2.0 * std::f64::consts::PI * u2;
            v.push(r * theta.cos());
            if v.len() < self.dim {
                v.push(r * theta.sin());
            }
        }
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        v
    }
}

impl EmbeddingProvider for SyntheticProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        synthetic_embed_with(self, text)
    }
}

impl VectorSource for SyntheticProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, _id: &str, text: &str) -> Result<Cow<'_, [f64]>> {
        self.embed(text).map(Cow::Owned)
    }
}

pub fn synthetic_embed(text: &str, dim: usize, seed: u64) -> Result<Vec<f64>> {
    synthetic_embed_with(&SyntheticProvider::new(dim, seed)?, text)
}

fn synthetic_embed_with(p: &SyntheticProvider, text: &str) -> Result<Vec<f64>> {
    let mut tokens = text.split_whitespace().peekable();
    if tokens.peek().is_none() {
        return Err(Error::invalid("cannot embed empty text"));
    }
    let mut acc = vec![0.0; p.dim];
    for tok in tokens {
        for (a, t) in acc.iter_mut().zip(p.token_vector(tok)) {
            *a += t;
        }
    }
    let n = norm(&acc);
    if n == 0.0 {
        return Err(Error::numeric("token vectors cancelled to zero"));
    }
    acc.iter_mut().for_each(|x| *x /= n);
    Ok(acc)
}

/// Id → vector map with a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, v: &[f64]) -> Result<()> {
        self.insert_f32(id, v.iter().map(|&x| x as f32).collect())
    }

    pub fn insert_f32(&mut self, id: impl Into<String>, v: Vec<f32>) -> Result<()> {
        let id = id.into();
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if id.len() > u16::MAX as usize {
            return Err(Error::invalid(format!("id longer than {} bytes", u16::MAX)));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric(format!("non-finite entry in vector `{id}`")));
        }
        self.entries.insert(id, v);
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get_f32(&self, id: &str) -> Option<&[f32]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    /// The stored vector widened to `f64`.
    pub fn get(&self, id: &str) -> Option<Vec<f64>> {
        self.get_f32(id).map(|v| v.iter().map(|&x| x as f64).collect())
    }

    pub fn require(&self, id: &str) -> Result<Vec<f64>> {
        self.get(id).ok_or_else(|| Error::MissingEmbeddings(vec![id.to_string()]))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Ids from `wanted` that have no vector, in input order.
    pub fn missing<'a>(&self, wanted: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        wanted
            .into_iter()
            .filter(|id| !self.contains(id))
            .map(str::to_string)
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.entries.len() * (2 + 16 + 4 * self.dim));
        out.extend_from_slice(STORE_MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (id, v) in &self.entries {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != STORE_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad magic {magic:?}, expected \"EMBS\""),
            });
        }
        let version = r.u32("version")?;
        if version != STORE_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported version {version}"),
            });
        }
        let dim = r.u32("dim")? as usize;
        let count = r.u64("count")?;
        let mut store = EmbeddingStore::new(dim);
        for _ in 0..count {
            let at = r.pos as u64;
            let len = r.u16("id length")? as usize;
            let id = std::str::from_utf8(r.take(len, "id")?)
                .map_err(|_| Error::Format {
                    offset: at + 2,
                    message: "id is not valid UTF-8".into(),
                })?
                .to_string();
            let raw = r.take(4 * dim, "vector")?;
            let v: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if store.entries.insert(id.clone(), v).is_some() {
                return Err(Error::Format {
                    offset: at,
                    message: format!("duplicate id `{id}`"),
                });
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Format {
                offset: r.pos as u64,
                message: format!("{} trailing bytes after {count} entries", bytes.len() - r.pos),
            });
        }
        Ok(store)
    }

    /// Loads a store and checks its header dimension against `dim`.
    pub fn load_with_dim(path: &Path, dim: usize) -> Result<Self> {
        let store = Self::load(path)?;
        if store.dim != dim {
            return Err(Error::Format {
                offset: 8,
                message: format!("store dim {} disagrees with expected {dim}", store.dim),
            });
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

impl VectorSource for EmbeddingStore {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, id: &str, _text: &str) -> Result<Cow<'_, [f64]>> {
        self.require(id).map(Cow::Owned)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!(
                    "truncated reading {what}: need {n} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}
