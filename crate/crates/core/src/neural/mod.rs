//! Link/route message passing and the edge-scoring MLP, with hand-written
//! reverse-mode gradients for this fixed architecture.

mod model;
mod tensor;

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use model::{backward, gnn_forward, score_forward, EmbeddingCache, ModelSwitches, ScoreCache};
pub use tensor::Tensor;
pub(crate) use model::community_means;

use crate::error::{Error, Result};
use crate::features::{EDGE_FEATURES, NODE_FEATURES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub hidden_dim: usize,
    /// Number of message-passing layers on each of the two graphs.
    pub layers: usize,
    pub mlp_hidden: usize,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self { hidden_dim: 32, layers: 3, mlp_hidden: 64 }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.layers == 0 || self.mlp_hidden == 0 {
            return Err(Error::Config(format!("gnn dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Width of the scoring MLP input: edge embedding (3h), two community
    /// means (2h) and the source embedding (h).
    pub fn head_input(&self) -> usize {
        6 * self.hidden_dim
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        let h = self.hidden_dim;
        let mut shapes = vec![(h, NODE_FEATURES)];
        shapes.extend(std::iter::repeat_n((h, h), self.layers));
        shapes.push((h, EDGE_FEATURES));
        shapes.extend(std::iter::repeat_n((h, h), self.layers));
        shapes.push((self.mlp_hidden, self.head_input()));
        shapes.push((1, self.mlp_hidden));
        shapes.push((1, self.mlp_hidden));
        shapes.push((1, 1));
        shapes
    }
}

/// All trainable weights. Also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    config: GnnConfig,
    /// Node input projection followed by one matrix per node layer.
    pub node_weights: Vec<Tensor>,
    /// Edge input projection followed by one matrix per line-graph layer.
    pub edge_weights: Vec<Tensor>,
    pub mlp_w1: Tensor,
    pub mlp_b1: Tensor,
    pub mlp_w2: Tensor,
    pub mlp_b2: Tensor,
}

pub type Gradients = Parameters;

impl Parameters {
    pub fn zeros(config: GnnConfig) -> Result<Self> {
        config.validate()?;
        let mut tensors = config.shapes().into_iter().map(|(r, c)| Tensor::zeros(r, c));
        Ok(Self::assemble(config, &mut tensors))
    }

    fn assemble(config: GnnConfig, tensors: &mut impl Iterator<Item = Tensor>) -> Self {
        let l = config.layers + 1;
        let node_weights = tensors.by_ref().take(l).collect();
        let edge_weights = tensors.by_ref().take(l).collect();
        let mut next = || tensors.next().expect("shape list covers every tensor");
        Self {
            config,
            node_weights,
            edge_weights,
            mlp_w1: next(),
            mlp_b1: next(),
            mlp_w2: next(),
            mlp_b2: next(),
        }
    }

    pub fn config(&self) -> GnnConfig {
        self.config
    }

    /// Declaration order: node weights, edge weights, W1, b1, W2, b2.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.node_weights.iter().chain(&self.edge_weights).collect();
        out.extend([&self.mlp_w1, &self.mlp_b1, &self.mlp_w2, &self.mlp_b2]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> =
            self.node_weights.iter_mut().chain(self.edge_weights.iter_mut()).collect();
        out.extend([&mut self.mlp_w1, &mut self.mlp_b1, &mut self.mlp_w2, &mut self.mlp_b2]);
        out
    }

    pub fn norm(&self) -> f64 {
        self.tensors().iter().map(|t| t.squared_norm()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn scale(&mut self, k: f64) {
        self.tensors_mut().into_iter().for_each(|t| t.scale(k));
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, other: &Parameters, k: f64) {
        assert_eq!(self.config, other.config);
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_scaled(b, k);
        }
    }

    fn check_shapes(&self) -> Result<()> {
        let ok = self.config.shapes().iter().zip(self.tensors()).all(|(&s, t)| t.shape() == s)
            && self.node_weights.len() == self.config.layers + 1
            && self.edge_weights.len() == self.config.layers + 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Contract("parameter shapes do not match their config".into()))
        }
    }
}

/// Xavier-uniform weights, zero biases.
pub fn init_parameters<R: Rng + ?Sized>(config: GnnConfig, rng: &mut R) -> Result<Parameters> {
    let mut params = Parameters::zeros(config)?;
    let biases = [params.mlp_b1.data().as_ptr(), params.mlp_b2.data().as_ptr()];
    for t in params.tensors_mut() {
        if biases.contains(&t.data().as_ptr()) {
            continue;
        }
        let (fan_out, fan_in) = t.shape();
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        t.data_mut().iter_mut().for_each(|x| *x = rng.gen_range(-bound..=bound));
    }
    Ok(params)
}

const MAGIC: &[u8; 4] = b"RCKP";
const FORMAT_VERSION: u32 = 1;

/// Header (magic, version, hidden, layers, mlp_hidden, tensor count) then each
/// tensor as `rows, cols` and row-major values; all little-endian, `u32`
/// integers and `f64` values.
pub fn save_parameters<W: Write>(params: &Parameters, mut sink: W) -> Result<()> {
    let c = params.config;
    let tensors = params.tensors();
    sink.write_all(MAGIC)?;
    for x in [FORMAT_VERSION, c.hidden_dim as u32, c.layers as u32, c.mlp_hidden as u32, tensors.len() as u32] {
        sink.write_all(&x.to_le_bytes())?;
    }
    for t in tensors {
        sink.write_all(&(t.rows() as u32).to_le_bytes())?;
        sink.write_all(&(t.cols() as u32).to_le_bytes())?;
        for v in t.data() {
            sink.write_all(&v.to_le_bytes())?;
        }
    }
    sink.flush()?;
    Ok(())
}

/// Reads a checkpoint. With `expected` set, a different stored config is an
/// error rather than being adopted.
pub fn load_parameters<R: Read>(mut source: R, expected: Option<GnnConfig>) -> Result<Parameters> {
    let bad = |m: String| Error::Checkpoint(m);
    let mut magic = [0u8; 4];
    source.read_exact(&mut magic).map_err(|_| bad("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let read_u32 = |src: &mut R| -> Result<u32> {
        let mut b = [0u8; 4];
        src.read_exact(&mut b).map_err(|_| bad("truncated file".into()))?;
        Ok(u32::from_le_bytes(b))
    };
    let version = read_u32(&mut source)?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let config = GnnConfig {
        hidden_dim: read_u32(&mut source)? as usize,
        layers: read_u32(&mut source)? as usize,
        mlp_hidden: read_u32(&mut source)? as usize,
    };
    config.validate().map_err(|e| bad(e.to_string()))?;
    if let Some(want) = expected {
        if want != config {
            return Err(bad(format!("config mismatch: file has {config:?}, expected {want:?}")));
        }
    }
    let shapes = config.shapes();
    let count = read_u32(&mut source)? as usize;
    if count != shapes.len() {
        return Err(bad(format!("expected {} tensors, found {count}", shapes.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for (rows, cols) in shapes {
        let (r, c) = (read_u32(&mut source)? as usize, read_u32(&mut source)? as usize);
        if (r, c) != (rows, cols) {
            return Err(bad(format!("tensor shape {r}x{c}, expected {rows}x{cols}")));
        }
        let mut data = Vec::with_capacity(r * c);
        let mut b = [0u8; 8];
        for _ in 0..r * c {
            source.read_exact(&mut b).map_err(|_| bad("truncated tensor data".into()))?;
            data.push(f64::from_le_bytes(b));
        }
        tensors.push(Tensor::from_vec(r, c, data));
    }
    let mut extra = [0u8; 1];
    if source.read(&mut extra)? != 0 {
        return Err(bad("trailing bytes after last tensor".into()));
    }
    let params = Parameters::assemble(config, &mut tensors.into_iter());
    params.check_shapes()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> GnnConfig {
        GnnConfig { hidden_dim: 4, layers: 2, mlp_hidden: 5 }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_parameters(small(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = init_parameters(small(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        for t in a.tensors() {
            let (o, i) = t.shape();
            let bound = (6.0 / (i + o) as f64).sqrt();
            assert!(t.data().iter().all(|x| x.abs() <= bound));
        }
        assert!(a.mlp_b1.data().iter().all(|&x| x == 0.0));
        assert_eq!(a.mlp_b2.data(), &[0.0]);
        assert!(a.mlp_w2.data().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn xavier_variance() {
        let cfg = GnnConfig { hidden_dim: 100, layers: 1, mlp_hidden: 1 };
        let p = init_parameters(cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let w = &p.node_weights[1];
        let n = w.data().len() as f64;
        let mean = w.data().iter().sum::<f64>() / n;
        let var = w.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let expect = 2.0 / 200.0;
        assert!((var - expect).abs() < 0.1 * expect, "var {var} vs {expect}");
    }

    #[test]
    fn shapes_follow_config() {
        let p = Parameters::zeros(small()).unwrap();
        assert_eq!(p.node_weights.len(), 3);
        assert_eq!(p.node_weights[0].shape(), (4, 5));
        assert_eq!(p.edge_weights[0].shape(), (4, 3));
        assert_eq!(p.mlp_w1.shape(), (5, 24));
        assert!(Parameters::zeros(GnnConfig { layers: 0, ..small() }).is_err());
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let p = init_parameters(small(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut bytes = Vec::new();
        save_parameters(&p, &mut bytes).unwrap();
        let q = load_parameters(bytes.as_slice(), Some(small())).unwrap();
        assert_eq!(p, q);
        let mut again = Vec::new();
        save_parameters(&q, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn load_rejects_mismatch_and_corruption() {
        let p = init_parameters(small(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut bytes = Vec::new();
        save_parameters(&p, &mut bytes).unwrap();
        let wrong = GnnConfig { layers: 3, ..small() };
        assert!(matches!(load_parameters(bytes.as_slice(), Some(wrong)), Err(Error::Checkpoint(_))));
        assert!(load_parameters(&bytes[..bytes.len() - 3], None).is_err());
        let mut versioned = bytes.clone();
        versioned[4] = 9;
        assert!(load_parameters(versioned.as_slice(), None).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(load_parameters(longer.as_slice(), None).is_err());
        assert!(load_parameters(&b"nope"[..], None).is_err());
    }
}
