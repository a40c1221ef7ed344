//! The Q-network: three strided "same"-padded convolutions (16@3x3, 32@5x5,
//! 64@3x3, all stride 2, ReLU) into a 256-unit hidden layer and a linear
//! output per action. Convolutions run as im2col + GEMM; the backward pass
//! produces exact gradients of the mean squared Bellman error, flowing only
//! through each sample's taken action.
//!
//! The network is generic over the scalar type: f32 for training throughput,
//! f64 where tests compare against finite differences.

use super::DqnError;
use ndarray::{Array2, Axis, LinalgScalar};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};

pub trait Scalar: LinalgScalar + PartialOrd + Send + Sync + std::fmt::Debug {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> f32 {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> f64 {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// (filters, kernel, stride) per convolution stage.
pub const CONV_SPECS: [(usize, usize, usize); 3] = [(16, 3, 2), (32, 5, 2), (64, 3, 2)];
pub const DEFAULT_HIDDEN: usize = 256;
pub const MIN_OBS_SIZE: usize = crate::environment::MIN_OBS_SIZE;

const CHECKPOINT_MAGIC: &[u8; 4] = b"QNET";
const CHECKPOINT_VERSION: u32 = 1;

/// Tensor names addressable through the introspection API, in checkpoint
/// order.
pub const PARAM_GROUPS: [&str; 10] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "conv3.weight",
    "conv3.bias",
    "fc_hidden.weight",
    "fc_hidden.bias",
    "fc_out.weight",
    "fc_out.bias",
];

#[derive(Debug, Clone)]
struct ConvLayer<S> {
    /// (c_out, c_in * k * k); column index is ci * k * k + ky * k + kx.
    weight: Array2<S>,
    bias: Vec<S>,
    c_in: usize,
    k: usize,
    stride: usize,
}

#[derive(Debug, Clone)]
struct DenseLayer<S> {
    /// (out, in)
    weight: Array2<S>,
    bias: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct QNetwork<S: Scalar> {
    obs: usize,
    actions: usize,
    hidden: usize,
    convs: Vec<ConvLayer<S>>,
    fc1: DenseLayer<S>,
    fc2: DenseLayer<S>,
    /// Spatial edge length entering each stage, then the final one: [D, s1, s2, s3].
    sizes: [usize; 4],
}

fn conv_out(n: usize, stride: usize) -> usize {
    (n + stride - 1) / stride
}

/// TF-style "same" padding: total = (out-1)*stride + k - in, front half rounded down.
fn pad_begin(n: usize, k: usize, stride: usize) -> usize {
    let out = conv_out(n, stride);
    ((out - 1) * stride + k).saturating_sub(n) / 2
}

/// Unfold a batched feature map (c_in, batch*h*h) into patch columns
/// (c_in*k*k, batch*out*out), zero-filling outside the padded border.
fn im2col<S: Scalar>(
    input: &Array2<S>,
    batch: usize,
    h: usize,
    k: usize,
    stride: usize,
) -> Array2<S> {
    let c_in = input.nrows();
    let out = conv_out(h, stride);
    let pad = pad_begin(h, k, stride) as isize;
    let n_in = h * h;
    let n_out = out * out;
    let total_cols = batch * n_out;
    let mut cols = Array2::from_elem((c_in * k * k, total_cols), S::from_f64(0.0));
    let src_all = input.as_slice().expect("standard layout");
    let dst_all = cols.as_slice_mut().expect("standard layout");
    for ci in 0..c_in {
        let src_c = &src_all[ci * batch * n_in..][..batch * n_in];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst_row = &mut dst_all[row * total_cols..][..total_cols];
                for b in 0..batch {
                    let src_b = &src_c[b * n_in..][..n_in];
                    let dst_b = &mut dst_row[b * n_out..][..n_out];
                    for oy in 0..out {
                        let iy = (oy * stride + ky) as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src_y = &src_b[iy as usize * h..][..h];
                        for ox in 0..out {
                            let ix = (ox * stride + kx) as isize - pad;
                            if ix < 0 || ix >= h as isize {
                                continue;
                            }
                            dst_b[oy * out + ox] = src_y[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of `im2col`: scatter-add patch-column gradients back onto the
/// input feature map.
fn col2im<S: Scalar>(
    dcols: &Array2<S>,
    batch: usize,
    c_in: usize,
    h: usize,
    k: usize,
    stride: usize,
) -> Array2<S> {
    let out = conv_out(h, stride);
    let pad = pad_begin(h, k, stride) as isize;
    let n_in = h * h;
    let n_out = out * out;
    let total_cols = batch * n_out;
    let mut dinput = Array2::from_elem((c_in, batch * n_in), S::from_f64(0.0));
    let src_all = dcols.as_slice().expect("standard layout");
    let dst_all = dinput.as_slice_mut().expect("standard layout");
    for ci in 0..c_in {
        let dst_c = &mut dst_all[ci * batch * n_in..][..batch * n_in];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src_row = &src_all[row * total_cols..][..total_cols];
                for b in 0..batch {
                    let src_b = &src_row[b * n_out..][..n_out];
                    let dst_b = &mut dst_c[b * n_in..][..n_in];
                    for oy in 0..out {
                        let iy = (oy * stride + ky) as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for ox in 0..out {
                            let ix = (ox * stride + kx) as isize - pad;
                            if ix < 0 || ix >= h as isize {
                                continue;
                            }
                            let d = dst_b[iy as usize * h + ix as usize] + src_b[oy * out + ox];
                            dst_b[iy as usize * h + ix as usize] = d;
                        }
                    }
                }
            }
        }
    }
    dinput
}

struct ConvCache<S> {
    cols: Array2<S>,
    /// Post-ReLU output feature map (c_out, batch*out*out).
    act: Array2<S>,
}

struct ForwardCache<S> {
    conv: Vec<ConvCache<S>>,
    /// Flattened conv output (batch, c3*s3*s3), channel-major per item.
    x3: Array2<S>,
    /// Post-ReLU hidden activations (batch, hidden).
    h: Array2<S>,
    q: Array2<S>,
}

/// One supervised sample for the Bellman regression.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a, S: Scalar> {
    pub obs: &'a Array2<S>,
    pub action: usize,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct Gradients<S: Scalar> {
    conv_w: Vec<Array2<S>>,
    conv_b: Vec<Vec<S>>,
    fc1_w: Array2<S>,
    fc1_b: Vec<S>,
    fc2_w: Array2<S>,
    fc2_b: Vec<S>,
}

impl<S: Scalar> QNetwork<S> {
    /// Fresh network with uniform Glorot weights (zero biases), seeded.
    pub fn new(obs: usize, actions: usize, hidden: usize, seed: u64) -> Result<Self, DqnError> {
        let mut net = Self::zeroed(obs, actions, hidden)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for conv in &mut net.convs {
            let fan_in = conv.weight.ncols();
            let fan_out = conv.weight.nrows() * conv.k * conv.k;
            glorot_fill(&mut conv.weight, fan_in, fan_out, &mut rng);
        }
        let (f_in, f_out) = (net.fc1.weight.ncols(), net.fc1.weight.nrows());
        glorot_fill(&mut net.fc1.weight, f_in, f_out, &mut rng);
        let (f_in, f_out) = (net.fc2.weight.ncols(), net.fc2.weight.nrows());
        glorot_fill(&mut net.fc2.weight, f_in, f_out, &mut rng);
        Ok(net)
    }

    fn zeroed(obs: usize, actions: usize, hidden: usize) -> Result<Self, DqnError> {
        if obs < MIN_OBS_SIZE {
            return Err(DqnError::BadObsSize(obs));
        }
        if actions == 0 || hidden == 0 {
            return Err(DqnError::BadArchitecture("zero-width layer".into()));
        }
        let mut sizes = [obs; 4];
        let mut convs = Vec::new();
        let mut c_in = 1;
        for (i, (c_out, k, stride)) in CONV_SPECS.iter().copied().enumerate() {
            sizes[i + 1] = conv_out(sizes[i], stride);
            convs.push(ConvLayer {
                weight: Array2::from_elem((c_out, c_in * k * k), S::from_f64(0.0)),
                bias: vec![S::from_f64(0.0); c_out],
                c_in,
                k,
                stride,
            });
            c_in = c_out;
        }
        let flat = CONV_SPECS[2].0 * sizes[3] * sizes[3];
        Ok(QNetwork {
            obs,
            actions,
            hidden,
            convs,
            fc1: DenseLayer {
                weight: Array2::from_elem((hidden, flat), S::from_f64(0.0)),
                bias: vec![S::from_f64(0.0); hidden],
            },
            fc2: DenseLayer {
                weight: Array2::from_elem((actions, hidden), S::from_f64(0.0)),
                bias: vec![S::from_f64(0.0); actions],
            },
            sizes,
        })
    }

    pub fn obs_size(&self) -> usize {
        self.obs
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    fn check_obs(&self, obs: &Array2<S>) -> Result<(), DqnError> {
        if obs.dim() != (self.obs, self.obs) {
            return Err(DqnError::ObsShapeMismatch {
                expected: self.obs,
                got: obs.dim(),
            });
        }
        Ok(())
    }

    fn forward_cached(&self, obses: &[&Array2<S>]) -> Result<ForwardCache<S>, DqnError> {
        if obses.is_empty() {
            return Err(DqnError::EmptyBatch);
        }
        let batch = obses.len();
        let d = self.obs;
        for o in obses {
            self.check_obs(o)?;
        }
        let mut f0 = Array2::from_elem((1, batch * d * d), S::from_f64(0.0));
        {
            let dst = f0.as_slice_mut().expect("standard layout");
            for (b, o) in obses.iter().enumerate() {
                let src = o.as_slice().expect("standard layout");
                dst[b * d * d..(b + 1) * d * d].copy_from_slice(src);
            }
        }
        let zero = S::from_f64(0.0);
        let mut conv_caches = Vec::with_capacity(3);
        let mut current = f0;
        for (i, layer) in self.convs.iter().enumerate() {
            let cols = im2col(&current, batch, self.sizes[i], layer.k, layer.stride);
            let mut act = layer.weight.dot(&cols);
            for (r, mut row) in act.rows_mut().into_iter().enumerate() {
                let bias = layer.bias[r];
                for v in row.iter_mut() {
                    let x = *v + bias;
                    *v = if x > zero { x } else { zero };
                }
            }
            conv_caches.push(ConvCache { cols, act: act.clone() });
            current = act;
        }
        // Flatten channel-major per item: x3[b, c*n3 + p] = act[c, b*n3 + p].
        let s3 = self.sizes[3];
        let n3 = s3 * s3;
        let c3 = CONV_SPECS[2].0;
        let act3 = &conv_caches[2].act;
        let mut x3 = Array2::from_elem((batch, c3 * n3), zero);
        {
            let src = act3.as_slice().expect("standard layout");
            let dst = x3.as_slice_mut().expect("standard layout");
            for c in 0..c3 {
                for b in 0..batch {
                    let s = &src[c * batch * n3 + b * n3..][..n3];
                    dst[b * c3 * n3 + c * n3..][..n3].copy_from_slice(s);
                }
            }
        }
        let mut h = x3.dot(&self.fc1.weight.t());
        for mut row in h.rows_mut() {
            for (v, b) in row.iter_mut().zip(&self.fc1.bias) {
                let x = *v + *b;
                *v = if x > zero { x } else { zero };
            }
        }
        let mut q = h.dot(&self.fc2.weight.t());
        for mut row in q.rows_mut() {
            for (v, b) in row.iter_mut().zip(&self.fc2.bias) {
                *v = *v + *b;
            }
        }
        Ok(ForwardCache { conv: conv_caches, x3, h, q })
    }

    /// Q-values for a batch of observations, one row per input.
    pub fn forward_batch(&self, obses: &[&Array2<S>]) -> Result<Array2<S>, DqnError> {
        Ok(self.forward_cached(obses)?.q)
    }

    /// Q-values for one observation.
    pub fn forward(&self, obs: &Array2<S>) -> Result<Vec<S>, DqnError> {
        let q = self.forward_batch(&[obs])?;
        Ok(q.row(0).to_vec())
    }

    /// Mean squared error of the taken actions' Q-values against `target`s.
    pub fn batch_loss(&self, batch: &[BatchItem<'_, S>]) -> Result<f64, DqnError> {
        let obses: Vec<&Array2<S>> = batch.iter().map(|b| b.obs).collect();
        let q = self.forward_batch(&obses)?;
        let mut loss = 0.0;
        for (i, item) in batch.iter().enumerate() {
            if item.action >= self.actions {
                return Err(DqnError::ActionOutOfRange {
                    action: item.action,
                    actions: self.actions,
                });
            }
            let err = q[(i, item.action)].to_f64() - item.target;
            loss += err * err;
        }
        Ok(loss / batch.len() as f64)
    }

    /// Backward pass of the batch loss. The gradient flows only through each
    /// sample's taken action; all other output units contribute nothing.
    pub fn backward_batch(
        &self,
        batch: &[BatchItem<'_, S>],
    ) -> Result<(Gradients<S>, f64), DqnError> {
        if batch.is_empty() {
            return Err(DqnError::EmptyBatch);
        }
        for item in batch {
            if item.action >= self.actions {
                return Err(DqnError::ActionOutOfRange {
                    action: item.action,
                    actions: self.actions,
                });
            }
        }
        let obses: Vec<&Array2<S>> = batch.iter().map(|b| b.obs).collect();
        let cache = self.forward_cached(&obses)?;
        let n = batch.len();
        let zero = S::from_f64(0.0);

        let mut loss = 0.0;
        let mut dq = Array2::from_elem((n, self.actions), zero);
        for (i, item) in batch.iter().enumerate() {
            let err = cache.q[(i, item.action)].to_f64() - item.target;
            loss += err * err;
            dq[(i, item.action)] = S::from_f64(2.0 * err / n as f64);
        }
        loss /= n as f64;

        let fc2_w = dq.t().dot(&cache.h);
        let fc2_b = dq.sum_axis(Axis(0)).to_vec();
        let mut dh = dq.dot(&self.fc2.weight);
        for (dv, hv) in dh.iter_mut().zip(cache.h.iter()) {
            if !(*hv > zero) {
                *dv = zero;
            }
        }
        let fc1_w = dh.t().dot(&cache.x3);
        let fc1_b = dh.sum_axis(Axis(0)).to_vec();
        let dx = dh.dot(&self.fc1.weight);

        // Unflatten (batch, c3*n3) back to the feature-map layout (c3, batch*n3).
        let s3 = self.sizes[3];
        let n3 = s3 * s3;
        let c3 = CONV_SPECS[2].0;
        let mut dact = Array2::from_elem((c3, n * n3), zero);
        {
            let src = dx.as_slice().expect("standard layout");
            let dst = dact.as_slice_mut().expect("standard layout");
            for b in 0..n {
                for c in 0..c3 {
                    let s = &src[b * c3 * n3 + c * n3..][..n3];
                    dst[c * n * n3 + b * n3..][..n3].copy_from_slice(s);
                }
            }
        }

        let mut conv_w = vec![Array2::from_elem((0, 0), zero); 3];
        let mut conv_b = vec![Vec::new(); 3];
        for l in (0..3).rev() {
            let layer = &self.convs[l];
            let cache_l = &cache.conv[l];
            let mut dz = dact;
            for (dv, av) in dz.iter_mut().zip(cache_l.act.iter()) {
                if !(*av > zero) {
                    *dv = zero;
                }
            }
            conv_w[l] = dz.dot(&cache_l.cols.t());
            conv_b[l] = dz.sum_axis(Axis(1)).to_vec();
            if l > 0 {
                let dcols = layer.weight.t().dot(&dz);
                dact = col2im(&dcols, n, layer.c_in, self.sizes[l], layer.k, layer.stride);
            } else {
                dact = Array2::from_elem((0, 0), zero);
            }
        }

        Ok((Gradients { conv_w, conv_b, fc1_w, fc1_b, fc2_w, fc2_b }, loss))
    }

    /// One plain SGD step: w -= lr * g.
    pub fn apply_gradients(&mut self, g: &Gradients<S>, learning_rate: f64) {
        let lr = S::from_f64(learning_rate);
        for (layer, (gw, gb)) in
            self.convs.iter_mut().zip(g.conv_w.iter().zip(g.conv_b.iter()))
        {
            for (w, gv) in layer.weight.iter_mut().zip(gw.iter()) {
                *w = *w - lr * *gv;
            }
            for (b, gv) in layer.bias.iter_mut().zip(gb.iter()) {
                *b = *b - lr * *gv;
            }
        }
        for (w, gv) in self.fc1.weight.iter_mut().zip(g.fc1_w.iter()) {
            *w = *w - lr * *gv;
        }
        for (b, gv) in self.fc1.bias.iter_mut().zip(g.fc1_b.iter()) {
            *b = *b - lr * *gv;
        }
        for (w, gv) in self.fc2.weight.iter_mut().zip(g.fc2_w.iter()) {
            *w = *w - lr * *gv;
        }
        for (b, gv) in self.fc2.bias.iter_mut().zip(g.fc2_b.iter()) {
            *b = *b - lr * *gv;
        }
    }

    fn tensors(&self) -> Vec<(&'static str, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        for (i, conv) in self.convs.iter().enumerate() {
            out.push((
                PARAM_GROUPS[2 * i],
                vec![conv.weight.nrows(), conv.weight.ncols()],
                conv.weight.iter().map(|v| v.to_f64()).collect(),
            ));
            out.push((
                PARAM_GROUPS[2 * i + 1],
                vec![conv.bias.len()],
                conv.bias.iter().map(|v| v.to_f64()).collect(),
            ));
        }
        for (name_w, name_b, layer) in
            [("fc_hidden.weight", "fc_hidden.bias", &self.fc1), ("fc_out.weight", "fc_out.bias", &self.fc2)]
        {
            out.push((
                name_w,
                vec![layer.weight.nrows(), layer.weight.ncols()],
                layer.weight.iter().map(|v| v.to_f64()).collect(),
            ));
            out.push((name_b, vec![layer.bias.len()], layer.bias.iter().map(|v| v.to_f64()).collect()));
        }
        out
    }

    /// Number of scalars in a named tensor.
    pub fn group_len(&self, group: &str) -> Option<usize> {
        self.group_slice(group).map(|s| s.len())
    }

    fn group_slice(&self, group: &str) -> Option<Vec<S>> {
        let v = match group {
            "conv1.weight" => self.convs[0].weight.iter().copied().collect(),
            "conv1.bias" => self.convs[0].bias.clone(),
            "conv2.weight" => self.convs[1].weight.iter().copied().collect(),
            "conv2.bias" => self.convs[1].bias.clone(),
            "conv3.weight" => self.convs[2].weight.iter().copied().collect(),
            "conv3.bias" => self.convs[2].bias.clone(),
            "fc_hidden.weight" => self.fc1.weight.iter().copied().collect(),
            "fc_hidden.bias" => self.fc1.bias.clone(),
            "fc_out.weight" => self.fc2.weight.iter().copied().collect(),
            "fc_out.bias" => self.fc2.bias.clone(),
            _ => return None,
        };
        Some(v)
    }

    /// Read one scalar by (group, flat row-major index).
    pub fn get_param(&self, group: &str, index: usize) -> Option<f64> {
        self.group_slice(group)?.get(index).map(|v| v.to_f64())
    }

    /// Overwrite one scalar by (group, flat row-major index).
    pub fn set_param(&mut self, group: &str, index: usize, value: f64) -> bool {
        let v = S::from_f64(value);
        let slot: Option<&mut S> = match group {
            "conv1.weight" => self.convs[0].weight.as_slice_mut().unwrap().get_mut(index),
            "conv1.bias" => self.convs[0].bias.get_mut(index),
            "conv2.weight" => self.convs[1].weight.as_slice_mut().unwrap().get_mut(index),
            "conv2.bias" => self.convs[1].bias.get_mut(index),
            "conv3.weight" => self.convs[2].weight.as_slice_mut().unwrap().get_mut(index),
            "conv3.bias" => self.convs[2].bias.get_mut(index),
            "fc_hidden.weight" => self.fc1.weight.as_slice_mut().unwrap().get_mut(index),
            "fc_hidden.bias" => self.fc1.bias.get_mut(index),
            "fc_out.weight" => self.fc2.weight.as_slice_mut().unwrap().get_mut(index),
            "fc_out.bias" => self.fc2.bias.get_mut(index),
            _ => None,
        };
        match slot {
            Some(s) => {
                *s = v;
                true
            }
            None => false,
        }
    }

    /// Versioned binary checkpoint; weights stored as little-endian f64.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), DqnError> {
        w.write_all(CHECKPOINT_MAGIC)?;
        for v in [CHECKPOINT_VERSION, self.obs as u32, self.actions as u32, self.hidden as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for (_, dims, data) in self.tensors() {
            w.write_all(&(dims.len() as u32).to_le_bytes())?;
            for d in &dims {
                w.write_all(&(*d as u32).to_le_bytes())?;
            }
            for v in &data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, DqnError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(DqnError::BadCheckpoint("bad magic bytes".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(DqnError::BadCheckpoint(format!("unsupported version {version}")));
        }
        let obs = read_u32(&mut r)? as usize;
        let actions = read_u32(&mut r)? as usize;
        let hidden = read_u32(&mut r)? as usize;
        let mut net = Self::zeroed(obs, actions, hidden)?;
        for (name, dims, _) in net.clone().tensors() {
            let ndim = read_u32(&mut r)? as usize;
            if ndim != dims.len() {
                return Err(DqnError::BadCheckpoint(format!("{name}: rank {ndim}, want {}", dims.len())));
            }
            let mut got = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                got.push(read_u32(&mut r)? as usize);
            }
            if got != dims {
                return Err(DqnError::BadCheckpoint(format!("{name}: shape {got:?}, want {dims:?}")));
            }
            let len: usize = dims.iter().product();
            for i in 0..len {
                let v = read_f64(&mut r)?;
                if !net.set_param(name, i, v) {
                    return Err(DqnError::BadCheckpoint(format!("{name}: index {i} out of range")));
                }
            }
        }
        Ok(net)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DqnError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, DqnError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn glorot_fill<S: Scalar, R: Rng>(w: &mut Array2<S>, fan_in: usize, fan_out: usize, rng: &mut R) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in w.iter_mut() {
        *v = S::from_f64(rng.random_range(-a..=a));
    }
}

/// Copy the agent's weights into the target network. Both must share an
/// architecture; afterwards the two produce bit-identical outputs.
pub fn sync_target<S: Scalar>(net: &QNetwork<S>, target: &mut QNetwork<S>) -> Result<(), DqnError> {
    if (net.obs, net.actions, net.hidden) != (target.obs, target.actions, target.hidden) {
        return Err(DqnError::BadArchitecture(format!(
            "agent is ({}, {}, {}), target is ({}, {}, {})",
            net.obs, net.actions, net.hidden, target.obs, target.actions, target.hidden
        )));
    }
    *target = net.clone();
    Ok(())
}

/// Q-values for one observation (thin wrapper over the method, for symmetry
/// with the rest of the agent API).
pub fn q_forward<S: Scalar>(net: &QNetwork<S>, obs: &Array2<S>) -> Result<Vec<S>, DqnError> {
    net.forward(obs)
}

/// Gradients and loss of the mean squared Bellman error over a batch.
pub fn q_backward<S: Scalar>(
    net: &QNetwork<S>,
    batch: &[BatchItem<'_, S>],
) -> Result<(Gradients<S>, f64), DqnError> {
    net.backward_batch(batch)
}

impl<S: Scalar> Gradients<S> {
    /// Read one gradient scalar by (group, flat row-major index), mirroring
    /// the network's parameter indexing.
    pub fn get(&self, group: &str, index: usize) -> Option<f64> {
        let v: Option<S> = match group {
            "conv1.weight" => self.conv_w[0].iter().nth(index).copied(),
            "conv1.bias" => self.conv_b[0].get(index).copied(),
            "conv2.weight" => self.conv_w[1].iter().nth(index).copied(),
            "conv2.bias" => self.conv_b[1].get(index).copied(),
            "conv3.weight" => self.conv_w[2].iter().nth(index).copied(),
            "conv3.bias" => self.conv_b[2].get(index).copied(),
            "fc_hidden.weight" => self.fc1_w.iter().nth(index).copied(),
            "fc_hidden.bias" => self.fc1_b.get(index).copied(),
            "fc_out.weight" => self.fc2_w.iter().nth(index).copied(),
            "fc_out.bias" => self.fc2_b.get(index).copied(),
            _ => None,
        };
        v.map(|v| v.to_f64())
    }
}
