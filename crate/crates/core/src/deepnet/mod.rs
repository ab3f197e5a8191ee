//! From-scratch 3D ConvNet: valid convolutions, 2x2x2 max pooling, ReLU, a
//! fully connected layer, and a two-node softmax output trained with binary
//! cross entropy. Everything runs in f64; the full-size architecture stays
//! constructible for parameter counting while desk-scale variants train.

mod layers;
mod tensor;
mod train;

use std::fs;
use std::io::Read as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{StudyRecord, ALL_ANATOMIES};

pub use layers::{bce_loss, bce_softmax_grad, relu, relu_backward, softmax2, Conv3d, Dense, MaxPool, PROB_CLAMP};
pub use tensor::Tensor;
pub use train::{learning_rate, train, write_train_log, EpochLog, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dims: (usize, usize, usize),
    pub in_channels: usize,
    pub conv_filters: Vec<usize>,
    pub kernel: (usize, usize, usize),
    pub pool: (usize, usize, usize),
    pub fc_units: usize,
    pub dropout: f64,
    /// ReLU on every conv layer and the FC layer; false keeps ReLU on the
    /// first conv layer only.
    pub relu_all: bool,
}

impl NetworkSpec {
    /// The published full-size architecture. Constructible for shape and
    /// parameter-count reporting; training it is not desk-feasible.
    pub fn published() -> NetworkSpec {
        NetworkSpec {
            input_dims: (512, 512, 45),
            in_channels: 8,
            conv_filters: vec![50, 100, 100, 100],
            kernel: (5, 5, 2),
            pool: (2, 2, 2),
            fc_units: 6000,
            dropout: 0.35,
            relu_all: true,
        }
    }

    /// A small architecture with the same layer composition for the given
    /// input size.
    pub fn desk(input_dims: (usize, usize, usize)) -> NetworkSpec {
        NetworkSpec {
            input_dims,
            in_channels: 8,
            conv_filters: vec![8, 16],
            kernel: (3, 3, 2),
            // depth pools only through valid convs; desk inputs are shallow
            pool: (2, 2, 1),
            fc_units: 32,
            dropout: 0.35,
            relu_all: true,
        }
    }

    /// Channel count and spatial dims after each conv+pool stage, then the
    /// flattened size feeding the FC layer. Errors if any stage collapses a
    /// spatial dim below 1.
    pub fn layer_plan(&self) -> Result<(Vec<(usize, (usize, usize, usize))>, usize)> {
        if self.conv_filters.is_empty() {
            return Err(Error::InvalidArgument("need >= 1 conv layer".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        let mut stages = Vec::new();
        let mut dims = self.input_dims;
        let mut channels = self.in_channels;
        for &filters in &self.conv_filters {
            let conv = Conv3d::zeros(channels, filters, self.kernel);
            let after_conv = conv.out_dims(dims)?;
            let pool = MaxPool { window: self.pool };
            dims = pool.out_dims(after_conv)?;
            channels = filters;
            stages.push((channels, dims));
        }
        let flat = channels * dims.0 * dims.1 * dims.2;
        Ok((stages, flat))
    }

    pub fn parameter_count(&self) -> Result<u64> {
        let (_, flat) = self.layer_plan()?;
        let (kx, ky, kz) = self.kernel;
        let kvol = (kx * ky * kz) as u64;
        let mut count = 0u64;
        let mut in_c = self.in_channels as u64;
        for &f in &self.conv_filters {
            let f = f as u64;
            count += f * in_c * kvol + f;
            in_c = f;
        }
        count += (flat as u64) * self.fc_units as u64 + self.fc_units as u64;
        count += self.fc_units as u64 * 2 + 2;
        Ok(count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub convs: Vec<Conv3d>,
    pub fc: Dense,
    pub out: Dense,
}

pub struct ForwardCache {
    /// Input to each conv layer (post dropout of the previous stage).
    conv_inputs: Vec<Tensor>,
    /// Pre-activation conv outputs.
    conv_pre: Vec<Tensor>,
    pool_argmax: Vec<Vec<usize>>,
    /// Dropout scale per element of each pooled stage output; empty when
    /// dropout is off.
    stage_masks: Vec<Vec<f64>>,
    flat: Vec<f64>,
    fc_pre: Vec<f64>,
    fc_mask: Vec<f64>,
    fc_act: Vec<f64>,
    pub probs: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub convs: Vec<(Vec<f64>, Vec<f64>)>,
    pub fc: (Vec<f64>, Vec<f64>),
    pub out: (Vec<f64>, Vec<f64>),
}

impl Network {
    /// Seeded init: uniform in +-sqrt(1/fan_in) per layer.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Network> {
        let (_, flat) = spec.layer_plan()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [f64], fan_in: usize| {
            let s = (1.0 / fan_in as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.gen_range(-s..s);
            }
        };
        let mut convs = Vec::new();
        let mut in_c = spec.in_channels;
        let (kx, ky, kz) = spec.kernel;
        for &f in &spec.conv_filters {
            let mut conv = Conv3d::zeros(in_c, f, spec.kernel);
            fill(&mut conv.weights, in_c * kx * ky * kz);
            convs.push(conv);
            in_c = f;
        }
        let mut fc = Dense::zeros(flat, spec.fc_units);
        fill(&mut fc.weights, flat);
        let mut out = Dense::zeros(spec.fc_units, 2);
        fill(&mut out.weights, spec.fc_units);
        Ok(Network {
            spec,
            convs,
            fc,
            out,
        })
    }

    fn dropout_mask(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> Vec<f64> {
        let keep = 1.0 - rate;
        (0..len)
            .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
            .collect()
    }

    /// Forward pass. `dropout` supplies the rng and rate at train time; None
    /// is the deterministic evaluation pass.
    pub fn forward(
        &self,
        input: &Tensor,
        mut dropout: Option<(&mut ChaCha8Rng, f64)>,
    ) -> Result<ForwardCache> {
        if input.channels != self.spec.in_channels || input.dims != self.spec.input_dims {
            return Err(Error::InvalidArgument(format!(
                "input {} x {:?} does not match network {} x {:?}",
                input.channels, input.dims, self.spec.in_channels, self.spec.input_dims
            )));
        }
        let pool = MaxPool {
            window: self.spec.pool,
        };
        let mut conv_inputs = Vec::new();
        let mut conv_pre = Vec::new();
        let mut pool_argmax = Vec::new();
        let mut stage_masks = Vec::new();
        let mut current = input.clone();
        for (l, conv) in self.convs.iter().enumerate() {
            conv_inputs.push(current.clone());
            let pre = conv.forward(&current)?;
            conv_pre.push(pre.clone());
            let mut act = pre;
            if self.spec.relu_all || l == 0 {
                relu(&mut act.data);
            }
            let (mut pooled, argmax) = pool.forward(&act)?;
            pool_argmax.push(argmax);
            let mask = match dropout.as_mut() {
                Some((rng, rate)) if *rate > 0.0 => {
                    let m = Self::dropout_mask(rng, pooled.len(), *rate);
                    for (v, s) in pooled.data.iter_mut().zip(&m) {
                        *v *= s;
                    }
                    m
                }
                _ => Vec::new(),
            };
            stage_masks.push(mask);
            current = pooled;
        }
        let flat = current.data.clone();
        let fc_pre = self.fc.forward(&flat)?;
        let mut fc_act = fc_pre.clone();
        if self.spec.relu_all {
            relu(&mut fc_act);
        }
        let fc_mask = match dropout.as_mut() {
            Some((rng, rate)) if *rate > 0.0 => {
                let m = Self::dropout_mask(rng, fc_act.len(), *rate);
                for (v, s) in fc_act.iter_mut().zip(&m) {
                    *v *= s;
                }
                m
            }
            _ => Vec::new(),
        };
        let logits = self.out.forward(&fc_act)?;
        let probs = softmax2([logits[0], logits[1]]);
        Ok(ForwardCache {
            conv_inputs,
            conv_pre,
            pool_argmax,
            stage_masks,
            flat,
            fc_pre,
            fc_mask,
            fc_act,
            probs,
        })
    }

    /// Class-1 probability, dropout-free.
    pub fn predict(&self, input: &Tensor) -> Result<f64> {
        Ok(self.forward(input, None)?.probs[1])
    }

    pub fn backward(&self, cache: &ForwardCache, label: u8) -> Result<Gradients> {
        let pool = MaxPool {
            window: self.spec.pool,
        };
        let g_logits = bce_softmax_grad(cache.probs, label);
        let (mut g_fc_act, out_w, out_b) = self.out.backward(&cache.fc_act, &g_logits);
        if !cache.fc_mask.is_empty() {
            for (g, s) in g_fc_act.iter_mut().zip(&cache.fc_mask) {
                *g *= s;
            }
        }
        if self.spec.relu_all {
            relu_backward(&cache.fc_pre, &mut g_fc_act);
        }
        let (g_flat, fc_w, fc_b) = self.fc.backward(&cache.flat, &g_fc_act);
        let mut convs = vec![(Vec::new(), Vec::new()); self.convs.len()];
        let last = self.convs.len() - 1;
        let (last_c, last_dims) = (
            cache.conv_pre[last].channels,
            pool.out_dims(cache.conv_pre[last].dims)?,
        );
        let mut g_stage = Tensor::from_data(last_c, last_dims, g_flat)?;
        for l in (0..self.convs.len()).rev() {
            if !cache.stage_masks[l].is_empty() {
                for (g, s) in g_stage.data.iter_mut().zip(&cache.stage_masks[l]) {
                    *g *= s;
                }
            }
            let mut g_act = pool.backward(
                cache.conv_pre[l].dims,
                cache.conv_pre[l].channels,
                &cache.pool_argmax[l],
                &g_stage,
            );
            if self.spec.relu_all || l == 0 {
                relu_backward(&cache.conv_pre[l].data, &mut g_act.data);
            }
            let (g_in, g_w, g_b) = self.convs[l].backward(&cache.conv_inputs[l], &g_act)?;
            convs[l] = (g_w, g_b);
            g_stage = g_in;
        }
        Ok(Gradients {
            convs,
            fc: (fc_w, fc_b),
            out: (out_w, out_b),
        })
    }
}

pub const NET_MAGIC: &str = "CTPNET 1";

impl Network {
    /// Versioned binary file: magic line, JSON structure header, "end" line,
    /// then all parameters as little-endian f64 in layer order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_string(&self.spec)?;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(NET_MAGIC.as_bytes());
        bytes.push(b'\n');
        bytes.extend_from_slice(header.as_bytes());
        bytes.push(b'\n');
        bytes.extend_from_slice(b"end\n");
        let mut push = |vals: &[f64]| {
            for v in vals {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        };
        for conv in &self.convs {
            push(&conv.weights);
            push(&conv.biases);
        }
        push(&self.fc.weights);
        push(&self.fc.biases);
        push(&self.out.weights);
        push(&self.out.biases);
        fs::write(path, bytes).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Network> {
        let mut file = fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut lines = Vec::new();
        let mut start = 0usize;
        let mut cursor = 0usize;
        while lines.len() < 3 {
            match bytes[cursor..].iter().position(|&b| b == b'\n') {
                None => {
                    return Err(Error::MalformedHeader {
                        path: path.to_path_buf(),
                        reason: "missing header terminator".into(),
                    })
                }
                Some(p) => {
                    lines.push(&bytes[start..cursor + p]);
                    cursor += p + 1;
                    start = cursor;
                }
            }
        }
        if lines[0] != NET_MAGIC.as_bytes() {
            return Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                reason: format!("bad magic {:?}", String::from_utf8_lossy(lines[0])),
            });
        }
        if lines[2] != b"end" {
            return Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                reason: "expected 'end' line".into(),
            });
        }
        let spec: NetworkSpec = serde_json::from_slice(lines[1])?;
        let mut net = Network::init(spec.clone(), 0)?;
        let expect = spec.parameter_count()? as usize * 8;
        let payload = &bytes[cursor..];
        if payload.len() != expect {
            return Err(Error::PayloadMismatch {
                path: path.to_path_buf(),
                expected: expect,
                got: payload.len(),
            });
        }
        let mut offset = 0usize;
        let mut take = |vals: &mut [f64]| {
            for v in vals.iter_mut() {
                let mut buf = [0u8; 8];
                buf.copy_from_slice(&payload[offset..offset + 8]);
                *v = f64::from_le_bytes(buf);
                offset += 8;
            }
        };
        for conv in net.convs.iter_mut() {
            take(&mut conv.weights);
            take(&mut conv.biases);
        }
        take(&mut net.fc.weights);
        take(&mut net.fc.biases);
        take(&mut net.out.weights);
        take(&mut net.out.biases);
        Ok(net)
    }
}

/// Build the 8-channel input stack for a study: HU / 1000 in channel 0, the
/// 7 anatomy masks (fixed order) as 0/1 in channels 1-7.
pub fn study_tensor(study: &StudyRecord) -> Result<Tensor> {
    let dims = study.volume.dims();
    let mut t = Tensor::zeros(8, dims);
    let n = dims.0 * dims.1 * dims.2;
    for (i, &hu) in study.volume.data().iter().enumerate() {
        t.data[i] = hu as f64 / 1000.0;
    }
    for (c, &anatomy) in ALL_ANATOMIES.iter().enumerate() {
        let mask = study.mask(anatomy);
        for (i, &bit) in mask.bits().iter().enumerate() {
            t.data[(c + 1) * n + i] = bit as f64;
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn micro_spec() -> NetworkSpec {
        NetworkSpec {
            input_dims: (6, 6, 4),
            in_channels: 2,
            conv_filters: vec![3],
            kernel: (3, 3, 2),
            pool: (2, 2, 1),
            fc_units: 4,
            dropout: 0.0,
            relu_all: true,
        }
    }

    fn random_input(seed: u64, spec: &NetworkSpec) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = spec.in_channels * spec.input_dims.0 * spec.input_dims.1 * spec.input_dims.2;
        Tensor::from_data(
            spec.in_channels,
            spec.input_dims,
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_network_outputs_half_half() {
        let spec = micro_spec();
        let mut net = Network::init(spec.clone(), 0).unwrap();
        for conv in net.convs.iter_mut() {
            conv.weights.iter_mut().for_each(|w| *w = 0.0);
            conv.biases.iter_mut().for_each(|b| *b = 0.0);
        }
        net.fc.weights.iter_mut().for_each(|w| *w = 0.0);
        net.fc.biases.iter_mut().for_each(|b| *b = 0.0);
        net.out.weights.iter_mut().for_each(|w| *w = 0.0);
        net.out.biases.iter_mut().for_each(|b| *b = 0.0);
        let cache = net.forward(&random_input(1, &spec), None).unwrap();
        assert_eq!(cache.probs, [0.5, 0.5]);
        // output bias gradient at symmetry, y = 1: softmax(0) - onehot(1)
        let grads = net.backward(&cache, 1).unwrap();
        assert_eq!(grads.out.1, vec![0.5, -0.5]);
    }

    #[test]
    fn softmax_outputs_sum_to_one() {
        let spec = micro_spec();
        let net = Network::init(spec.clone(), 3).unwrap();
        for seed in 0..5 {
            let cache = net.forward(&random_input(seed, &spec), None).unwrap();
            assert_relative_eq!(cache.probs[0] + cache.probs[1], 1.0, epsilon = 1e-12);
            assert!(cache.probs.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn published_architecture_shapes_and_parameter_count() {
        let spec = NetworkSpec::published();
        let (stages, flat) = spec.layer_plan().unwrap();
        assert_eq!(stages.len(), 4);
        assert_eq!(stages[0], (50, (254, 254, 22)));
        assert_eq!(stages[3], (100, (28, 28, 1)));
        assert_eq!(flat, 100 * 28 * 28);
        let count = spec.parameter_count().unwrap();
        // conv: 50x8 then 100x50 then 2x 100x100 filters of 5*5*2 = 50 taps
        let conv: u64 =
            (50 * 8 * 50 + 50) + (100 * 50 * 50 + 100) + 2 * (100 * 100 * 50 + 100);
        let expect = conv + 78_400u64 * 6000 + 6000 + 6000 * 2 + 2;
        assert_eq!(count, expect);
        assert!(count > 470_000_000);
    }

    #[test]
    fn shrinking_below_one_voxel_rejected() {
        let spec = NetworkSpec {
            input_dims: (8, 8, 3),
            conv_filters: vec![2, 2, 2],
            ..micro_spec()
        };
        assert!(spec.layer_plan().is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let spec = micro_spec();
        let h = 1e-5;
        let mut max_rel: f64 = 0.0;
        for seed in 0..20u64 {
            let net = Network::init(spec.clone(), seed).unwrap();
            let input = random_input(seed + 1000, &spec);
            let label = (seed % 2) as u8;
            let cache = net.forward(&input, None).unwrap();
            let grads = net.backward(&cache, label).unwrap();
            let loss_of = |n: &Network| -> f64 {
                bce_loss(n.forward(&input, None).unwrap().probs[1], label)
            };
            let mut check = |get: &dyn Fn(&mut Network) -> &mut Vec<f64>, analytic: &[f64]| {
                for i in 0..analytic.len() {
                    let mut np = net.clone();
                    get(&mut np)[i] += h;
                    let fp = loss_of(&np);
                    let mut nm = net.clone();
                    get(&mut nm)[i] -= h;
                    let fm = loss_of(&nm);
                    let fd = (fp - fm) / (2.0 * h);
                    let denom = analytic[i].abs().max(fd.abs()).max(1.0);
                    let rel = (analytic[i] - fd).abs() / denom;
                    max_rel = max_rel.max(rel);
                }
            };
            for l in 0..net.convs.len() {
                check(&move |n: &mut Network| &mut n.convs[l].weights, &grads.convs[l].0);
                check(&move |n: &mut Network| &mut n.convs[l].biases, &grads.convs[l].1);
            }
            check(&|n: &mut Network| &mut n.fc.weights, &grads.fc.0);
            check(&|n: &mut Network| &mut n.fc.biases, &grads.fc.1);
            check(&|n: &mut Network| &mut n.out.weights, &grads.out.0);
            check(&|n: &mut Network| &mut n.out.biases, &grads.out.1);
        }
        assert!(max_rel < 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn save_load_round_trip() {
        let spec = micro_spec();
        let net = Network::init(spec, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        net.save(&path).unwrap();
        let back = Network::load(&path).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn truncated_network_file_rejected() {
        let spec = micro_spec();
        let net = Network::init(spec, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        net.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(Network::load(&path).is_err());
    }

    #[test]
    fn study_tensor_has_eight_channels() {
        use crate::synthio::{generate_phantom, PhantomSpec};
        let study = generate_phantom(&PhantomSpec::control(5, (16, 16, 4))).unwrap();
        let t = study_tensor(&study).unwrap();
        assert_eq!(t.channels, 8);
        assert_eq!(t.dims, (16, 16, 4));
        let n = 16 * 16 * 4;
        for c in 1..8 {
            assert!(t.data[c * n..(c + 1) * n]
                .iter()
                .all(|&v| v == 0.0 || v == 1.0));
        }
    }
}
