//! Forward-only, seeded-random implementation of the spatial-frequency
//! aggregation transformer used as a plug-in denoiser.
//!
//! The attention block treats each spectral channel as a token (the attention
//! matrix is channel-by-channel, so cost grows with bands, not pixels) and
//! adds a gated frequency branch operating on the amplitude spectrum of each
//! channel. A U-shaped stack halves spatial dims and doubles channels per
//! level on the way down and inverts that on the way up, with skip fusion.
//!
//! Weights are drawn once from a seeded generator (uniform in `+-1/sqrt(fan_in)`)
//! and never trained; the value of this module is exercising the mechanism,
//! not a learned prior. The forward pass is pure and deterministic per seed.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{HsiCube, OtfStack};
use crate::error::{Error, Result};
use crate::fourier::Fft2d;

/// Auxiliary planes appended to the input cube: one noise-strength plane plus
/// six pooled OTF-magnitude planes.
pub const AUX_PLANES: usize = 7;
const OTF_GROUPS: usize = 6;
const LN_EPS: f64 = 1e-6;

/// Exact (erf-form) GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfatConfig {
    /// Feature channels at the top level; doubled at each deeper level.
    pub channels: usize,
    /// Resolution levels in the U-shape (3 in the reference configuration).
    pub levels: usize,
    /// Attention heads per level, outermost first.
    pub heads: Vec<usize>,
    /// Initial value for the frequency-branch gate.
    pub beta: f64,
    /// Weight-generator seed.
    pub seed: u64,
}

impl Default for SfatConfig {
    fn default() -> Self {
        Self {
            channels: 8,
            levels: 3,
            heads: vec![1, 2, 4],
            beta: 1.0,
            seed: 0,
        }
    }
}

impl SfatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::InvalidParameter("levels must be >= 1".into()));
        }
        if self.heads.len() != self.levels {
            return Err(Error::InvalidParameter(format!(
                "expected {} head counts, got {}",
                self.levels,
                self.heads.len()
            )));
        }
        for (level, &heads) in self.heads.iter().enumerate() {
            let c = self.channels << level;
            if heads == 0 || !c.is_multiple_of(heads) {
                return Err(Error::InvalidParameter(format!(
                    "level {level}: {c} channels not divisible by {heads} heads"
                )));
            }
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidParameter("beta must be finite".into()));
        }
        Ok(())
    }

    /// Channel width at a given level.
    pub fn channels_at(&self, level: usize) -> usize {
        self.channels << level
    }
}

/// Dense feature map, channel-outermost like the cube types.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn add_scaled(&self, other: &Self, scale: f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + scale * b)
                .collect(),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, fan_in: usize) -> f64 {
    let bound = 1.0 / (fan_in as f64).sqrt();
    rng.random_range(-bound..bound)
}

/// Pointwise (1x1) channel mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    out_c: usize,
    in_c: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Linear {
    fn init(rng: &mut ChaCha8Rng, out_c: usize, in_c: usize) -> Self {
        let weight = (0..out_c * in_c).map(|_| uniform(rng, in_c)).collect();
        Self {
            out_c,
            in_c,
            weight,
            bias: vec![0.0; out_c],
        }
    }

    fn apply(&self, x: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(x.channels, self.in_c);
        let n = x.height * x.width;
        let mut out = FeatureMap::zeros(x.height, x.width, self.out_c);
        for o in 0..self.out_c {
            let plane = out.plane_mut(o);
            plane.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.in_c {
                let w = self.weight[o * self.in_c + i];
                if w == 0.0 {
                    continue;
                }
                let src = &x.data[i * n..(i + 1) * n];
                for (slot, s) in plane.iter_mut().zip(src) {
                    *slot += w * s;
                }
            }
        }
        out
    }

    /// Zeroes this layer, used by gate-off and residual-identity probes.
    pub fn zero_out(&mut self) {
        self.weight.iter_mut().for_each(|w| *w = 0.0);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }
}

/// Dense k x k convolution with zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    out_c: usize,
    in_c: usize,
    k: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Conv2d {
    fn init(rng: &mut ChaCha8Rng, out_c: usize, in_c: usize, k: usize) -> Self {
        let fan_in = in_c * k * k;
        let weight = (0..out_c * in_c * k * k)
            .map(|_| uniform(rng, fan_in))
            .collect();
        Self {
            out_c,
            in_c,
            k,
            weight,
            bias: vec![0.0; out_c],
        }
    }

    fn apply(&self, x: &FeatureMap, stride: usize, pad: usize) -> FeatureMap {
        debug_assert_eq!(x.channels, self.in_c);
        let out_h = (x.height + 2 * pad - self.k) / stride + 1;
        let out_w = (x.width + 2 * pad - self.k) / stride + 1;
        let mut out = FeatureMap::zeros(out_h, out_w, self.out_c);
        for o in 0..self.out_c {
            for r in 0..out_h {
                for c in 0..out_w {
                    let mut acc = self.bias[o];
                    for i in 0..self.in_c {
                        let plane = x.plane(i);
                        for kr in 0..self.k {
                            let sr = (r * stride + kr) as isize - pad as isize;
                            if sr < 0 || sr >= x.height as isize {
                                continue;
                            }
                            for kc in 0..self.k {
                                let sc = (c * stride + kc) as isize - pad as isize;
                                if sc < 0 || sc >= x.width as isize {
                                    continue;
                                }
                                let w =
                                    self.weight[((o * self.in_c + i) * self.k + kr) * self.k + kc];
                                acc += w * plane[sr as usize * x.width + sc as usize];
                            }
                        }
                    }
                    out.plane_mut(o)[r * out_w + c] = acc;
                }
            }
        }
        out
    }

    /// Zeroes this layer, used by gate-off and residual-identity probes.
    pub fn zero_out(&mut self) {
        self.weight.iter_mut().for_each(|w| *w = 0.0);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }
}

/// Depthwise k x k convolution (one kernel per channel), zero padding, same size.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseConv2d {
    channels: usize,
    k: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl DepthwiseConv2d {
    fn init(rng: &mut ChaCha8Rng, channels: usize, k: usize) -> Self {
        let fan_in = k * k;
        let weight = (0..channels * k * k)
            .map(|_| uniform(rng, fan_in))
            .collect();
        Self {
            channels,
            k,
            weight,
            bias: vec![0.0; channels],
        }
    }

    fn apply(&self, x: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(x.channels, self.channels);
        let pad = self.k / 2;
        let mut out = FeatureMap::zeros(x.height, x.width, x.channels);
        for ch in 0..self.channels {
            let plane = x.plane(ch);
            let dst = out.plane_mut(ch);
            for r in 0..x.height {
                for c in 0..x.width {
                    let mut acc = self.bias[ch];
                    for kr in 0..self.k {
                        let sr = (r + kr) as isize - pad as isize;
                        if sr < 0 || sr >= x.height as isize {
                            continue;
                        }
                        for kc in 0..self.k {
                            let sc = (c + kc) as isize - pad as isize;
                            if sc < 0 || sc >= x.width as isize {
                                continue;
                            }
                            acc += self.weight[(ch * self.k + kr) * self.k + kc]
                                * plane[sr as usize * x.width + sc as usize];
                        }
                    }
                    dst[r * x.width + c] = acc;
                }
            }
        }
        out
    }

    /// Zeroes this layer, used by gate-off and residual-identity probes.
    pub fn zero_out(&mut self) {
        self.weight.iter_mut().for_each(|w| *w = 0.0);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }
}

/// 2x2 stride-2 transposed convolution (exact spatial doubling).
#[derive(Debug, Clone, PartialEq)]
pub struct Deconv2d {
    out_c: usize,
    in_c: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Deconv2d {
    fn init(rng: &mut ChaCha8Rng, out_c: usize, in_c: usize) -> Self {
        let weight = (0..in_c * out_c * 4).map(|_| uniform(rng, in_c)).collect();
        Self {
            out_c,
            in_c,
            weight,
            bias: vec![0.0; out_c],
        }
    }

    fn apply(&self, x: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(x.channels, self.in_c);
        let (oh, ow) = (2 * x.height, 2 * x.width);
        let mut out = FeatureMap::zeros(oh, ow, self.out_c);
        for o in 0..self.out_c {
            let dst = out.plane_mut(o);
            dst.iter_mut().for_each(|v| *v = self.bias[o]);
        }
        for i in 0..self.in_c {
            let plane = x.plane(i);
            for o in 0..self.out_c {
                for dr in 0..2 {
                    for dc in 0..2 {
                        let w = self.weight[((i * self.out_c + o) * 2 + dr) * 2 + dc];
                        let dst = out.plane_mut(o);
                        for r in 0..x.height {
                            for c in 0..x.width {
                                dst[(2 * r + dr) * ow + 2 * c + dc] += w * plane[r * x.width + c];
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Per-token (per-pixel) normalization over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    channels: usize,
    gain: Vec<f64>,
    bias: Vec<f64>,
}

impl LayerNorm {
    fn init(channels: usize) -> Self {
        Self {
            channels,
            gain: vec![1.0; channels],
            bias: vec![0.0; channels],
        }
    }

    fn apply(&self, x: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(x.channels, self.channels);
        let n = x.height * x.width;
        let mut out = FeatureMap::zeros(x.height, x.width, x.channels);
        for s in 0..n {
            let mut mean = 0.0;
            for ch in 0..self.channels {
                mean += x.data[ch * n + s];
            }
            mean /= self.channels as f64;
            let mut var = 0.0;
            for ch in 0..self.channels {
                let d = x.data[ch * n + s] - mean;
                var += d * d;
            }
            var /= self.channels as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            for ch in 0..self.channels {
                out.data[ch * n + s] =
                    (x.data[ch * n + s] - mean) * inv * self.gain[ch] + self.bias[ch];
            }
        }
        out
    }
}

/// Spectral-token self-attention weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SsMsaWeights {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    /// Per-head logit scale.
    pub alphas: Vec<f64>,
    /// Positional-embedding path: depthwise conv, GELU, depthwise conv.
    pub pe_first: DepthwiseConv2d,
    pub pe_second: DepthwiseConv2d,
}

impl SsMsaWeights {
    /// Standalone seeded weights for one attention branch.
    pub fn seeded(seed: u64, channels: usize, heads: usize) -> Self {
        Self::init(&mut ChaCha8Rng::seed_from_u64(seed), channels, heads)
    }

    fn init(rng: &mut ChaCha8Rng, channels: usize, heads: usize) -> Self {
        Self {
            query: Linear::init(rng, channels, channels),
            key: Linear::init(rng, channels, channels),
            value: Linear::init(rng, channels, channels),
            output: Linear::init(rng, channels, channels),
            alphas: vec![1.0; heads],
            pe_first: DepthwiseConv2d::init(rng, channels, 3),
            pe_second: DepthwiseConv2d::init(rng, channels, 3),
        }
    }
}

/// Frequency-branch weights: two pointwise convolutions around a GELU.
#[derive(Debug, Clone, PartialEq)]
pub struct FsWeights {
    pub first: Linear,
    pub second: Linear,
}

impl FsWeights {
    /// Standalone seeded weights for one frequency branch.
    pub fn seeded(seed: u64, channels: usize) -> Self {
        Self::init(&mut ChaCha8Rng::seed_from_u64(seed), channels)
    }

    fn init(rng: &mut ChaCha8Rng, channels: usize) -> Self {
        Self {
            first: Linear::init(rng, channels, channels),
            second: Linear::init(rng, channels, channels),
        }
    }
}

/// Feed-forward path: pointwise expand, GELU, depthwise conv, GELU,
/// pointwise project.
#[derive(Debug, Clone, PartialEq)]
pub struct FfnWeights {
    pub expand: Linear,
    pub depthwise: DepthwiseConv2d,
    pub project: Linear,
}

impl FfnWeights {
    fn init(rng: &mut ChaCha8Rng, channels: usize) -> Self {
        Self {
            expand: Linear::init(rng, 2 * channels, channels),
            depthwise: DepthwiseConv2d::init(rng, 2 * channels, 3),
            project: Linear::init(rng, channels, 2 * channels),
        }
    }

    fn apply(&self, x: &FeatureMap) -> FeatureMap {
        let mut expanded = self.expand.apply(x);
        expanded.data.iter_mut().for_each(|v| *v = gelu(*v));
        let mut mixed = self.depthwise.apply(&expanded);
        mixed.data.iter_mut().for_each(|v| *v = gelu(*v));
        self.project.apply(&mixed)
    }
}

/// One attention block: LN, gated dual-branch attention, LN, FFN, both with
/// residual connections.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnBlockWeights {
    pub norm_attn: LayerNorm,
    pub ss: SsMsaWeights,
    pub fs: FsWeights,
    pub beta: f64,
    pub norm_ffn: LayerNorm,
    pub ffn: FfnWeights,
}

impl AttnBlockWeights {
    /// Standalone seeded weights for one full attention block.
    pub fn seeded(seed: u64, channels: usize, heads: usize, beta: f64) -> Self {
        Self::init(&mut ChaCha8Rng::seed_from_u64(seed), channels, heads, beta)
    }

    fn init(rng: &mut ChaCha8Rng, channels: usize, heads: usize, beta: f64) -> Self {
        Self {
            norm_attn: LayerNorm::init(channels),
            ss: SsMsaWeights::init(rng, channels, heads),
            fs: FsWeights::init(rng, channels),
            beta,
            norm_ffn: LayerNorm::init(channels),
            ffn: FfnWeights::init(rng, channels),
        }
    }
}

/// Full U-shape weight set, deterministic from the config seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SfatWeights {
    pub input_proj: Conv2d,
    /// Per encoder level: attention block, then stride-2 downsampling.
    pub encoder: Vec<(AttnBlockWeights, Conv2d)>,
    pub bottleneck: AttnBlockWeights,
    /// Per decoder level: upsampling, skip fusion, attention block.
    pub decoder: Vec<(Deconv2d, Linear, AttnBlockWeights)>,
    pub output_proj: Conv2d,
}

impl SfatWeights {
    /// Builds weights for cubes with `bands` spectral bands.
    pub fn init(config: &SfatConfig, bands: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let input_proj = Conv2d::init(&mut rng, config.channels, bands + AUX_PLANES, 3);
        let mut encoder = Vec::new();
        for level in 0..config.levels - 1 {
            let c = config.channels_at(level);
            let block = AttnBlockWeights::init(&mut rng, c, config.heads[level], config.beta);
            let down = Conv2d::init(&mut rng, 2 * c, c, 4);
            encoder.push((block, down));
        }
        let deepest = config.channels_at(config.levels - 1);
        let bottleneck = AttnBlockWeights::init(
            &mut rng,
            deepest,
            config.heads[config.levels - 1],
            config.beta,
        );
        let mut decoder = Vec::new();
        for level in (0..config.levels - 1).rev() {
            let c = config.channels_at(level);
            let up = Deconv2d::init(&mut rng, c, 2 * c);
            let fuse = Linear::init(&mut rng, c, 2 * c);
            let block = AttnBlockWeights::init(&mut rng, c, config.heads[level], config.beta);
            decoder.push((up, fuse, block));
        }
        let output_proj = Conv2d::init(&mut rng, bands, config.channels, 3);
        Ok(Self {
            input_proj,
            encoder,
            bottleneck,
            decoder,
            output_proj,
        })
    }
}

fn stable_softmax_rows(logits: &mut [f64], rows: usize, cols: usize) {
    for r in 0..rows {
        let row = &mut logits[r * cols..(r + 1) * cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Spectral-token multi-head self-attention.
///
/// Tokens are channels; logits for head `j` are `alpha_j * <Q_a, K_b>` summed
/// over all pixels, normalized over the key axis, and the attended output
/// mixes value planes. Spatial order therefore only enters through the
/// positional-embedding path.
pub fn ss_msa(x: &FeatureMap, w: &SsMsaWeights, heads: usize) -> Result<FeatureMap> {
    if heads == 0 || !x.channels.is_multiple_of(heads) {
        return Err(Error::InvalidParameter(format!(
            "{} channels not divisible by {heads} heads",
            x.channels
        )));
    }
    let per_head = x.channels / heads;
    let q = w.query.apply(x);
    let k = w.key.apply(x);
    let v = w.value.apply(x);

    let mut attended = FeatureMap::zeros(x.height, x.width, x.channels);
    for head in 0..heads {
        let base = head * per_head;
        let mut logits = vec![0.0; per_head * per_head];
        for a in 0..per_head {
            let qa = q.plane(base + a);
            for b in 0..per_head {
                let kb = k.plane(base + b);
                let dot: f64 = qa.iter().zip(kb).map(|(x, y)| x * y).sum();
                logits[a * per_head + b] = w.alphas[head] * dot;
            }
        }
        stable_softmax_rows(&mut logits, per_head, per_head);
        for a in 0..per_head {
            for b in 0..per_head {
                let weight = logits[a * per_head + b];
                let src = v.plane(base + b);
                let dst = attended.plane_mut(base + a);
                for (slot, s) in dst.iter_mut().zip(src) {
                    *slot += weight * s;
                }
            }
        }
    }

    let projected = w.output.apply(&attended);
    let mut pe = w.pe_first.apply(&v);
    pe.data.iter_mut().for_each(|val| *val = gelu(*val));
    let pe = w.pe_second.apply(&pe);
    Ok(projected.add(&pe))
}

/// Row-normalized attention matrices for each head, exposed for
/// normalization checks.
pub fn attention_matrices(x: &FeatureMap, w: &SsMsaWeights, heads: usize) -> Result<Vec<Vec<f64>>> {
    if heads == 0 || !x.channels.is_multiple_of(heads) {
        return Err(Error::InvalidParameter(format!(
            "{} channels not divisible by {heads} heads",
            x.channels
        )));
    }
    let per_head = x.channels / heads;
    let q = w.query.apply(x);
    let k = w.key.apply(x);
    let mut all = Vec::with_capacity(heads);
    for head in 0..heads {
        let base = head * per_head;
        let mut logits = vec![0.0; per_head * per_head];
        for a in 0..per_head {
            for b in 0..per_head {
                let dot: f64 = q
                    .plane(base + a)
                    .iter()
                    .zip(k.plane(base + b))
                    .map(|(x, y)| x * y)
                    .sum();
                logits[a * per_head + b] = w.alphas[head] * dot;
            }
        }
        stable_softmax_rows(&mut logits, per_head, per_head);
        all.push(logits);
    }
    Ok(all)
}

fn resize_width_bilinear(src: &[f64], height: usize, src_w: usize, dst_w: usize) -> Vec<f64> {
    let mut out = vec![0.0; height * dst_w];
    for r in 0..height {
        for c in 0..dst_w {
            let pos = ((c as f64 + 0.5) * src_w as f64 / dst_w as f64 - 0.5)
                .clamp(0.0, (src_w - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src_w - 1);
            let t = pos - lo as f64;
            out[r * dst_w + c] = (1.0 - t) * src[r * src_w + lo] + t * src[r * src_w + hi];
        }
    }
    out
}

/// Frequency branch: orthonormal real-input 2-D transform per channel,
/// amplitude spectrum, pointwise conv / GELU / pointwise conv, bilinear
/// restore of the halved width.
///
/// Operating on amplitudes makes the branch invariant to circular shifts of
/// its input.
pub fn fs_branch(x: &FeatureMap, w: &FsWeights) -> FeatureMap {
    let (h, width) = (x.height, x.width);
    let half_w = width / 2 + 1;
    let fft = Fft2d::new(h, width);
    let scale = 1.0 / ((h * width) as f64).sqrt();

    let mut amp = FeatureMap::zeros(h, half_w, x.channels);
    let mut plane = vec![Complex64::default(); h * width];
    for ch in 0..x.channels {
        for (dst, src) in plane.iter_mut().zip(x.plane(ch)) {
            *dst = Complex64::new(*src, 0.0);
        }
        fft.forward(&mut plane);
        let dst = amp.plane_mut(ch);
        for r in 0..h {
            for c in 0..half_w {
                dst[r * half_w + c] = plane[r * width + c].norm() * scale;
            }
        }
    }

    let mut mixed = w.first.apply(&amp);
    mixed.data.iter_mut().for_each(|v| *v = gelu(*v));
    let mixed = w.second.apply(&mixed);

    let mut out = FeatureMap::zeros(h, width, x.channels);
    for ch in 0..x.channels {
        let restored = resize_width_bilinear(mixed.plane(ch), h, half_w, width);
        out.plane_mut(ch).copy_from_slice(&restored);
    }
    out
}

/// Gated dual-branch attention: spectral-token attention plus `beta` times
/// the frequency branch.
pub fn sfa_msa(x: &FeatureMap, block: &AttnBlockWeights, heads: usize) -> Result<FeatureMap> {
    let spatial = ss_msa(x, &block.ss, heads)?;
    if block.beta == 0.0 {
        return Ok(spatial);
    }
    let freq = fs_branch(x, &block.fs);
    Ok(spatial.add_scaled(&freq, block.beta))
}

fn attn_block(x: &FeatureMap, w: &AttnBlockWeights, heads: usize) -> Result<FeatureMap> {
    let attended = sfa_msa(&w.norm_attn.apply(x), w, heads)?;
    let x = x.add(&attended);
    let fed = w.ffn.apply(&w.norm_ffn.apply(&x));
    Ok(x.add(&fed))
}

fn resize_bilinear_2d(
    src: &[f64],
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; dst_h * dst_w];
    for r in 0..dst_h {
        let pr =
            ((r as f64 + 0.5) * src_h as f64 / dst_h as f64 - 0.5).clamp(0.0, (src_h - 1) as f64);
        let r0 = pr.floor() as usize;
        let r1 = (r0 + 1).min(src_h - 1);
        let tr = pr - r0 as f64;
        for c in 0..dst_w {
            let pc = ((c as f64 + 0.5) * src_w as f64 / dst_w as f64 - 0.5)
                .clamp(0.0, (src_w - 1) as f64);
            let c0 = pc.floor() as usize;
            let c1 = (c0 + 1).min(src_w - 1);
            let tc = pc - c0 as f64;
            let top = (1.0 - tc) * src[r0 * src_w + c0] + tc * src[r0 * src_w + c1];
            let bottom = (1.0 - tc) * src[r1 * src_w + c0] + tc * src[r1 * src_w + c1];
            out[r * dst_w + c] = (1.0 - tr) * top + tr * bottom;
        }
    }
    out
}

/// The `(bands + 7)`-channel input assembly: the cube itself, a constant
/// noise-strength plane, and six band-group means of the OTF magnitude
/// resized to the cube grid (zeros when no OTF is supplied).
fn assemble_input(cube: &HsiCube, chi: f64, otf: Option<&OtfStack>) -> FeatureMap {
    let (h, w) = (cube.height(), cube.width());
    let n = h * w;
    let mut x = FeatureMap::zeros(h, w, cube.bands() + AUX_PLANES);
    x.data[..cube.data().len()].copy_from_slice(cube.data());
    x.plane_mut(cube.bands()).iter_mut().for_each(|v| *v = chi);
    if let Some(otf) = otf {
        let bands = otf.bands();
        for g in 0..OTF_GROUPS {
            let lo = g * bands / OTF_GROUPS;
            let hi = ((g + 1) * bands / OTF_GROUPS).max(lo + 1).min(bands);
            let mut pooled = vec![0.0; otf.height() * otf.width()];
            for b in lo..hi {
                for (slot, v) in pooled.iter_mut().zip(otf.band(b)) {
                    *slot += v.norm();
                }
            }
            let count = (hi - lo) as f64;
            pooled.iter_mut().for_each(|v| *v /= count);
            let resized = resize_bilinear_2d(&pooled, otf.height(), otf.width(), h, w);
            x.data[(cube.bands() + 1 + g) * n..(cube.bands() + 2 + g) * n]
                .copy_from_slice(&resized);
        }
    }
    x
}

/// Spatial shape and channel count after each attention block, recorded by
/// [`sfat_forward_traced`].
pub type StageShape = (usize, usize, usize);

fn forward_impl(
    cube: &HsiCube,
    chi: f64,
    otf: Option<&OtfStack>,
    config: &SfatConfig,
    weights: &SfatWeights,
    trace: Option<&mut Vec<StageShape>>,
) -> Result<HsiCube> {
    config.validate()?;
    if chi <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "chi must be > 0, got {chi}"
        )));
    }
    let divisor = 1usize << (config.levels - 1);
    if !cube.height().is_multiple_of(divisor) || !cube.width().is_multiple_of(divisor) {
        return Err(Error::InvalidParameter(format!(
            "spatial dims {}x{} not divisible by 2^{}",
            cube.height(),
            cube.width(),
            config.levels - 1
        )));
    }

    let mut shapes = Vec::new();
    let input = assemble_input(cube, chi, otf);
    let mut x = weights.input_proj.apply(&input, 1, 1);

    let mut skips = Vec::new();
    for (level, (block, down)) in weights.encoder.iter().enumerate() {
        x = attn_block(&x, block, config.heads[level])?;
        shapes.push((x.height, x.width, x.channels));
        skips.push(x.clone());
        x = down.apply(&x, 2, 1);
    }

    x = attn_block(&x, &weights.bottleneck, config.heads[config.levels - 1])?;
    shapes.push((x.height, x.width, x.channels));

    for (i, (up, fuse, block)) in weights.decoder.iter().enumerate() {
        let level = config.levels - 2 - i;
        let upsampled = up.apply(&x);
        let skip = &skips[level];
        let mut concat =
            FeatureMap::zeros(upsampled.height, upsampled.width, 2 * upsampled.channels);
        concat.data[..upsampled.data.len()].copy_from_slice(&upsampled.data);
        concat.data[upsampled.data.len()..].copy_from_slice(&skip.data);
        x = fuse.apply(&concat);
        x = attn_block(&x, block, config.heads[level])?;
        shapes.push((x.height, x.width, x.channels));
    }

    let residual = weights.output_proj.apply(&x, 1, 1);
    let data: Vec<f64> = cube
        .data()
        .iter()
        .zip(&residual.data)
        .map(|(a, b)| a + b)
        .collect();
    if let Some(out) = trace {
        *out = shapes;
    }
    HsiCube::new(cube.height(), cube.width(), cube.bands(), data)
}

/// Residual denoising forward pass: the cube plus the network's output head.
pub fn sfat_forward(
    cube: &HsiCube,
    chi: f64,
    otf: Option<&OtfStack>,
    config: &SfatConfig,
    weights: &SfatWeights,
) -> Result<HsiCube> {
    forward_impl(cube, chi, otf, config, weights, None)
}

/// Same as [`sfat_forward`] but also reports the shape after every attention
/// block, for shape-contract checks.
pub fn sfat_forward_traced(
    cube: &HsiCube,
    chi: f64,
    otf: Option<&OtfStack>,
    config: &SfatConfig,
    weights: &SfatWeights,
) -> Result<(HsiCube, Vec<StageShape>)> {
    let mut shapes = Vec::new();
    let out = forward_impl(cube, chi, otf, config, weights, Some(&mut shapes))?;
    Ok((out, shapes))
}
