//! Fully connected encoder mapping descriptor vectors to circuit angles or
//! kernel features, with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (row-major, `out × in`) followed by the bias. Hidden layers use the
//! configured activation; the output layer is affine.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{read_f64, read_u32};

/// Descriptor count of the input feature vectors.
pub const INPUT_DIM: usize = 39;
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a` and input `v`.
    fn derivative(self, v: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderNetwork {
    dims: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Gradients in the flat parameter layout, plus the gradient with respect to
/// the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRecord {
    dims: Vec<usize>,
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl GradientRecord {
    pub fn weight(&self, layer: usize, row: usize, col: usize) -> f64 {
        let (w, _) = layer_offsets(&self.dims, layer);
        self.params[w + row * self.dims[layer] + col]
    }

    pub fn bias(&self, layer: usize, row: usize) -> f64 {
        let (_, b) = layer_offsets(&self.dims, layer);
        self.params[b + row]
    }
}

fn layer_offsets(dims: &[usize], layer: usize) -> (usize, usize) {
    let start: usize = (0..layer).map(|l| dims[l] * dims[l + 1] + dims[l + 1]).sum();
    (start, start + dims[layer] * dims[layer + 1])
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "layer dims need at least two positive entries, got {dims:?}"
        )));
    }
    Ok(())
}

/// Activations recorded during a forward pass.
struct Trace {
    /// Layer inputs; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pre: Vec<Vec<f64>>,
}

impl EncoderNetwork {
    /// Default `39 → 64 → 32 → output_dim` shape.
    pub fn default_dims(output_dim: usize) -> Vec<usize> {
        vec![INPUT_DIM, DEFAULT_HIDDEN[0], DEFAULT_HIDDEN[1], output_dim]
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new(dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(dims));
        for w in dims.windows(2) {
            let a = (6.0 / (w[0] + w[1]) as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.random_range(-a..=a)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            params,
        })
    }

    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            params: vec![0.0; param_count(dims)],
        })
    }

    pub fn from_params(dims: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(dims, activation)?;
        net.set_params(&params)?;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("dims checked non-empty")
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                found: params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder parameters"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn weight(&self, layer: usize, row: usize, col: usize) -> f64 {
        let (w, _) = layer_offsets(&self.dims, layer);
        self.params[w + row * self.dims[layer] + col]
    }

    pub fn set_weight(&mut self, layer: usize, row: usize, col: usize, value: f64) {
        let (w, _) = layer_offsets(&self.dims, layer);
        self.params[w + row * self.dims[layer] + col] = value;
    }

    pub fn set_bias(&mut self, layer: usize, row: usize, value: f64) {
        let (_, b) = layer_offsets(&self.dims, layer);
        self.params[b + row] = value;
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder input"));
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut inputs = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.n_layers());
        for layer in 0..self.n_layers() {
            let (n_in, n_out) = (self.dims[layer], self.dims[layer + 1]);
            let (w, b) = layer_offsets(&self.dims, layer);
            let input = &inputs[layer];
            let z: Vec<f64> = (0..n_out)
                .map(|r| {
                    let row = &self.params[w + r * n_in..w + (r + 1) * n_in];
                    self.params[b + r] + row.iter().zip(input).map(|(a, v)| a * v).sum::<f64>()
                })
                .collect();
            if layer + 1 < self.n_layers() {
                inputs.push(z.iter().map(|&v| self.activation.apply(v)).collect());
            }
            pre.push(z);
        }
        Trace { inputs, pre }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let out = self.trace(x).pre.pop().expect("at least one layer");
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder output"));
        }
        Ok(out)
    }

    /// Gradient of `⟨upstream, forward(x)⟩` with respect to every parameter
    /// and to `x`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<GradientRecord> {
        self.check_input(x)?;
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                found: upstream.len(),
            });
        }
        let trace = self.trace(x);
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = upstream.to_vec();
        for layer in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.dims[layer], self.dims[layer + 1]);
            let (w, b) = layer_offsets(&self.dims, layer);
            let input = &trace.inputs[layer];
            for r in 0..n_out {
                grads[b + r] += delta[r];
                for c in 0..n_in {
                    grads[w + r * n_in + c] += delta[r] * input[c];
                }
            }
            let mut below = vec![0.0; n_in];
            for r in 0..n_out {
                for (c, slot) in below.iter_mut().enumerate() {
                    *slot += self.params[w + r * n_in + c] * delta[r];
                }
            }
            if layer > 0 {
                for (c, slot) in below.iter_mut().enumerate() {
                    *slot *= self.activation.derivative(trace.pre[layer - 1][c], input[c]);
                }
            }
            delta = below;
        }
        Ok(GradientRecord {
            dims: self.dims.clone(),
            params: grads,
            input: delta,
        })
    }

    const MAGIC: &'static [u8; 4] = b"QENC";
    const VERSION: u32 = 1;

    /// Layout (little endian): magic `QENC`, `u32` version, `u8` activation,
    /// `u32` dim count, the dims as `u32`, then the flat parameters as `f64`.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&[self.activation.code()])?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Format("not an encoder weight file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != Self::VERSION {
            return Err(Error::Format(format!("unsupported encoder file version {version}")));
        }
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let activation = match code[0] {
            0 => Activation::Tanh,
            1 => Activation::Relu,
            other => return Err(Error::Format(format!("unknown activation code {other}"))),
        };
        let n_dims = read_u32(&mut r)? as usize;
        if n_dims > 64 {
            return Err(Error::Format(format!("implausible layer count {n_dims}")));
        }
        let dims = (0..n_dims)
            .map(|_| read_u32(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        check_dims(&dims).map_err(|e| Error::Format(e.to_string()))?;
        let params = (0..param_count(&dims))
            .map(|_| read_f64(&mut r))
            .collect::<Result<Vec<_>>>()?;
        Self::from_params(&dims, activation, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        crate::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Per-feature z-score scaling fitted on one split and reused on others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics; constant features get unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("standardizer rows"))?;
        let d = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|c| {
                let var = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_input(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    /// Independent straight-line evaluation from the weight accessors.
    fn reference_forward(net: &EncoderNetwork, x: &[f64]) -> Vec<f64> {
        let dims = net.dims();
        let mut h = x.to_vec();
        for layer in 0..dims.len() - 1 {
            let (_, b) = layer_offsets(dims, layer);
            let mut next = Vec::new();
            for r in 0..dims[layer + 1] {
                let mut acc = net.params()[b + r];
                for (c, hv) in h.iter().enumerate() {
                    acc += net.weight(layer, r, c) * hv;
                }
                if layer + 2 < dims.len() {
                    acc = match net.activation() {
                        Activation::Tanh => acc.tanh(),
                        Activation::Relu => acc.max(0.0),
                    };
                }
                next.push(acc);
            }
            h = next;
        }
        h
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = EncoderNetwork::zeros(&EncoderNetwork::default_dims(4), Activation::Tanh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(net.forward(&random_input(39, &mut rng)).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn identity_block_selects_leading_inputs() {
        let mut net = EncoderNetwork::zeros(&[39, 5], Activation::Tanh).unwrap();
        for k in 0..5 {
            net.set_weight(0, k, k, 1.0);
        }
        let x: Vec<f64> = (0..39).map(|v| v as f64 * 0.1 - 1.0).collect();
        assert_eq!(net.forward(&x).unwrap(), x[..5].to_vec());
    }

    #[test]
    fn forward_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for activation in [Activation::Tanh, Activation::Relu] {
            let net = EncoderNetwork::new(&EncoderNetwork::default_dims(8), activation, 7).unwrap();
            for _ in 0..5 {
                let x = random_input(39, &mut rng);
                let got = net.forward(&x).unwrap();
                let want = reference_forward(&net, &x);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = EncoderNetwork::new(&[39, 4], Activation::Tanh, 0).unwrap();
        let mut x = vec![0.0; 39];
        x[3] = f64::NAN;
        assert!(matches!(net.forward(&x), Err(Error::NonFinite(_))));
        assert!(matches!(net.forward(&[0.0; 38]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn backward_simple_cases() {
        let net = EncoderNetwork::new(&[39, 16, 4], Activation::Tanh, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_input(39, &mut rng);
        let g = net.backward(&x, &[0.0; 4]).unwrap();
        assert!(g.params.iter().all(|&v| v == 0.0));

        let lin = EncoderNetwork::new(&[39, 3], Activation::Tanh, 5).unwrap();
        let up = [0.5, -1.5, 2.0];
        let g = lin.backward(&x, &up).unwrap();
        for i in 0..3 {
            assert_eq!(g.bias(0, i), up[i]);
            for j in 0..39 {
                assert!((g.weight(0, i, j) - x[j] * up[i]).abs() < 1e-15);
            }
        }
        assert!(matches!(lin.backward(&x, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    fn check_gradients(net: &EncoderNetwork, x: &[f64], up: &[f64]) {
        let g = net.backward(x, up).unwrap();
        let eps = 1e-5;
        let objective = |n: &EncoderNetwork, x: &[f64]| -> f64 {
            n.forward(x).unwrap().iter().zip(up).map(|(a, b)| a * b).sum()
        };
        let mut probe = net.clone();
        let mut p = net.params().to_vec();
        for k in 0..p.len() {
            let orig = p[k];
            p[k] = orig + eps;
            probe.set_params(&p).unwrap();
            let plus = objective(&probe, x);
            p[k] = orig - eps;
            probe.set_params(&p).unwrap();
            let minus = objective(&probe, x);
            p[k] = orig;
            let fd = (plus - minus) / (2.0 * eps);
            assert!(
                relative_gap(fd, g.params[k]) < 1e-4 || (fd - g.params[k]).abs() < 1e-9,
                "param {k}: fd {fd} vs {}",
                g.params[k]
            );
        }
        for c in 0..x.len() {
            let mut xp = x.to_vec();
            xp[c] += eps;
            let plus = objective(net, &xp);
            xp[c] -= 2.0 * eps;
            let fd = (plus - objective(net, &xp)) / (2.0 * eps);
            assert!(relative_gap(fd, g.input[c]) < 1e-4 || (fd - g.input[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn backward_matches_finite_differences_default_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = EncoderNetwork::new(&EncoderNetwork::default_dims(8), Activation::Tanh, 9).unwrap();
        let x = random_input(39, &mut rng);
        let up = random_input(8, &mut rng);
        check_gradients(&net, &x, &up);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn backward_matches_finite_differences(
            seed in 0u64..10_000,
            hidden in proptest::collection::vec(1usize..12, 0..3),
            out in 1usize..9,
        ) {
            let mut dims = vec![7];
            dims.extend(hidden);
            dims.push(out);
            let net = EncoderNetwork::new(&dims, Activation::Tanh, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let x = random_input(7, &mut rng);
            let up = random_input(out, &mut rng);
            check_gradients(&net, &x, &up);
        }

        #[test]
        fn tanh_outputs_bounded_for_bounded_inputs(seed in 0u64..10_000) {
            let net = EncoderNetwork::new(&EncoderNetwork::default_dims(4), Activation::Tanh, seed).unwrap();
            let x = vec![1e6; 39];
            let out = net.forward(&x).unwrap();
            // last hidden layer is bounded by 1, so the affine output is bounded by its row sums
            let (w, b) = layer_offsets(net.dims(), 2);
            for (r, v) in out.iter().enumerate() {
                let bound: f64 = net.params()[w + r * 32..w + (r + 1) * 32].iter().map(|a| a.abs()).sum::<f64>()
                    + net.params()[b + r].abs();
                prop_assert!(v.abs() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn glorot_init_is_seeded_and_bounded() {
        let a = EncoderNetwork::new(&[39, 64, 4], Activation::Tanh, 11).unwrap();
        let b = EncoderNetwork::new(&[39, 64, 4], Activation::Tanh, 11).unwrap();
        let c = EncoderNetwork::new(&[39, 64, 4], Activation::Tanh, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let limit = (6.0f64 / 103.0).sqrt();
        for r in 0..64 {
            for col in 0..39 {
                assert!(a.weight(0, r, col).abs() <= limit);
            }
        }
    }

    #[test]
    fn weight_file_round_trip() {
        let net = EncoderNetwork::new(&[39, 8, 3], Activation::Relu, 13).unwrap();
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        assert_eq!(EncoderNetwork::read_from(buf.as_slice()).unwrap(), net);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.bin");
        net.save(&path).unwrap();
        assert_eq!(EncoderNetwork::load(&path).unwrap(), net);
        assert!(matches!(EncoderNetwork::read_from(&buf[..buf.len() - 3]), Err(Error::Io(_))));
    }

    #[test]
    fn standardizer_uses_fit_statistics_only() {
        let train = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&train).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.transform(&[4.0, 7.0]).unwrap(), vec![2.0, 2.0]);
    }
}
