//! U-net generator and conditional patch discriminator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralnet::{
    dropout, dropout_backward, fnv1a64, leaky_relu, leaky_relu_backward, relu, relu_backward,
    sigmoid, sigmoid_backward, Checkpoint, ConvCache, ConvGrads, ConvKind, ConvLayer,
    ConvSpec, Tensor, ENCODER_SLOPE,
};
use crate::rng::{self, Rng};

const DOWN: ConvSpec = ConvSpec::new(4, 2, 1);
const SAME: ConvSpec = ConvSpec::new(3, 1, 1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Side of the square input image; must be divisible by `2^levels`.
    pub size: usize,
    pub levels: usize,
    pub base_channels: usize,
    pub spectral_norm: bool,
    /// Dropout rate of decoder levels `1..levels`; the outermost level never drops.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            size: 64,
            levels: 4,
            base_channels: 16,
            spectral_norm: true,
            dropout: 0.5,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.base_channels == 0 {
            return Err(Error::InvalidParam("generator needs >= 1 level and channel".into()));
        }
        if self.size == 0 || self.size % (1 << self.levels) != 0 {
            return Err(Error::InvalidParam(format!(
                "image size {} is not divisible by 2^{}",
                self.size, self.levels
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParam(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

/// Visits parameter tensors in a fixed order; shared by optimizer and checkpoints.
pub trait Parameterized {
    fn layers(&self) -> Vec<&ConvLayer>;
    fn layers_mut(&mut self) -> Vec<&mut ConvLayer>;
    fn kind_tag(&self) -> &'static str;

    fn arch_hash(&self) -> u64 {
        let mut desc = String::from(self.kind_tag());
        for l in self.layers() {
            desc.push('|');
            desc.push_str(&l.describe());
        }
        fnv1a64(desc.as_bytes())
    }

    fn param_sizes(&self) -> Vec<usize> {
        self.layers()
            .iter()
            .flat_map(|l| [l.weight.len(), l.bias.len()])
            .collect()
    }

    fn power_iterate(&mut self, iters: usize) {
        for l in self.layers_mut() {
            l.power_iterate(iters);
        }
    }

    fn to_checkpoint(&self, step: u64) -> Checkpoint {
        Checkpoint {
            arch_hash: self.arch_hash(),
            step,
            blocks: self.layers().iter().flat_map(|l| l.blocks()).collect(),
        }
    }

    fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        let expected = self.arch_hash();
        if ck.arch_hash != expected {
            return Err(Error::ArchitectureMismatch {
                expected,
                found: ck.arch_hash,
            });
        }
        for l in self.layers_mut() {
            l.load_blocks(ck)?;
        }
        Ok(())
    }
}

/// Gradients for every layer, in [`Parameterized::layers`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads(pub Vec<ConvGrads>);

impl NetGrads {
    pub fn zeros(net: &impl Parameterized) -> Self {
        NetGrads(net.layers().into_iter().map(ConvGrads::zeros_like).collect())
    }

    pub fn accumulate(&mut self, other: &NetGrads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.accumulate(b);
        }
    }

    pub fn flat(&self) -> Vec<&[f64]> {
        self.0
            .iter()
            .flat_map(|g| [g.weight.as_slice(), g.bias.as_slice()])
            .collect()
    }
}

/// Applies one optimizer step to a network from its gradients.
pub fn apply_update(
    net: &mut impl Parameterized,
    opt: &mut crate::neuralnet::Adam,
    grads: &NetGrads,
) -> Result<()> {
    let g = grads.flat();
    let mut params: Vec<&mut [f64]> = net
        .layers_mut()
        .into_iter()
        .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
        .collect();
    opt.step(&mut params, &g)
}

#[derive(Debug, Clone)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub encoder: Vec<ConvLayer>,
    pub bottleneck: ConvLayer,
    /// `decoder[i]` upsamples into level `i`'s resolution.
    pub decoder: Vec<ConvLayer>,
    pub head: ConvLayer,
}

/// Everything the backward pass needs from one forward pass.
pub struct GeneratorTrace {
    input: Tensor,
    enc: Vec<(ConvCache, Tensor)>,
    bottleneck: (ConvCache, Tensor),
    dec: Vec<(ConvCache, Tensor, Option<Vec<f64>>)>,
    head: ConvCache,
    output: Tensor,
}

impl Generator {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(config.seed, &[0x6e6e]);
        let sn = config.spectral_norm;
        let lv = config.levels;
        let encoder = (0..lv)
            .map(|i| {
                let cin = if i == 0 { 2 } else { config.channels(i - 1) };
                ConvLayer::new(format!("enc{i}"), ConvKind::Forward, cin, config.channels(i), DOWN, sn, &mut r)
            })
            .collect();
        let deep = config.channels(lv - 1);
        let bottleneck = ConvLayer::new("bottleneck", ConvKind::Forward, deep, deep, SAME, sn, &mut r);
        let decoder = (0..lv)
            .map(|i| {
                let cout = config.channels(i.saturating_sub(1));
                ConvLayer::new(format!("dec{i}"), ConvKind::Transposed, 2 * config.channels(i), cout, DOWN, sn, &mut r)
            })
            .collect();
        let head = ConvLayer::new("head", ConvKind::Forward, config.channels(0) + 2, 2, SAME, sn, &mut r);
        Ok(Self {
            config,
            encoder,
            bottleneck,
            decoder,
            head,
        })
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let s = self.config.size;
        let [_, c, h, w] = x.shape();
        if (c, h, w) != (2, s, s) {
            return Err(Error::Shape(format!(
                "generator expects (N, 2, {s}, {s}), got {:?}",
                x.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass; dropout is active iff `noise` is given.
    pub fn forward(&self, x: &Tensor, mut noise: Option<&mut Rng>) -> Result<(Tensor, GeneratorTrace)> {
        self.check_input(x)?;
        let mut enc = Vec::with_capacity(self.config.levels);
        let mut h = x.clone();
        for layer in &self.encoder {
            let (pre, cache) = layer.forward(&h)?;
            h = leaky_relu(&pre, ENCODER_SLOPE);
            enc.push((cache, pre));
        }
        let (pre, cache) = self.bottleneck.forward(&h)?;
        h = leaky_relu(&pre, ENCODER_SLOPE);
        let bottleneck = (cache, pre);

        let mut dec = Vec::with_capacity(self.config.levels);
        for i in (0..self.config.levels).rev() {
            let skip = leaky_relu(&enc[i].1, ENCODER_SLOPE);
            let cat = Tensor::concat_channels(&h, &skip)?;
            let (pre, cache) = self.decoder[i].forward(&cat)?;
            let act = relu(&pre);
            let rate = if i == 0 { 0.0 } else { self.config.dropout };
            let (out, mask) = match noise.as_deref_mut() {
                Some(r) => dropout(&act, rate, r, true),
                None => (act, None),
            };
            h = out;
            dec.push((cache, pre, mask));
        }
        let cat = Tensor::concat_channels(&h, x)?;
        let (pre, head) = self.head.forward(&cat)?;
        let output = sigmoid(&pre);
        Ok((
            output.clone(),
            GeneratorTrace {
                input: x.clone(),
                enc,
                bottleneck,
                dec,
                head,
                output,
            },
        ))
    }

    /// Gradients of all parameters and of the input, given `d loss / d output`.
    pub fn backward(&self, trace: &GeneratorTrace, grad_out: &Tensor) -> Result<(NetGrads, Tensor)> {
        let lv = self.config.levels;
        let mut enc_grads: Vec<Option<ConvGrads>> = vec![None; lv];
        let mut dec_grads: Vec<Option<ConvGrads>> = vec![None; lv];
        // gradient flowing into each encoder activation from its skip link
        let mut skip_grad: Vec<Option<Tensor>> = vec![None; lv];

        let g = sigmoid_backward(&trace.output, grad_out);
        let (g, head_grads) = self.head.backward(&trace.head, &g)?;
        let (mut g, mut grad_input) = g.split_channels(self.config.channels(0));

        // decoder traces were pushed deepest first
        for (k, (cache, pre, mask)) in trace.dec.iter().enumerate().rev() {
            let i = lv - 1 - k;
            let gd = dropout_backward(&g, mask.as_deref());
            let gd = relu_backward(pre, &gd);
            let (gcat, grads) = self.decoder[i].backward(cache, &gd)?;
            dec_grads[i] = Some(grads);
            let ch_h = gcat.channels() - self.config.channels(i);
            let (gh, gskip) = gcat.split_channels(ch_h);
            skip_grad[i] = Some(gskip);
            g = gh;
        }

        let g_b = leaky_relu_backward(&trace.bottleneck.1, &g, ENCODER_SLOPE);
        let (mut g, bottleneck_grads) = self.bottleneck.backward(&trace.bottleneck.0, &g_b)?;
        for i in (0..lv).rev() {
            g.add_assign(skip_grad[i].as_ref().expect("every level has a skip"));
            let (cache, pre) = &trace.enc[i];
            let gp = leaky_relu_backward(pre, &g, ENCODER_SLOPE);
            let (gx, grads) = self.encoder[i].backward(cache, &gp)?;
            enc_grads[i] = Some(grads);
            g = gx;
        }
        grad_input.add_assign(&g);
        debug_assert_eq!(grad_input.shape(), trace.input.shape());

        let mut all: Vec<ConvGrads> = enc_grads.into_iter().map(Option::unwrap).collect();
        all.push(bottleneck_grads);
        all.extend(dec_grads.into_iter().map(Option::unwrap));
        all.push(head_grads);
        Ok((NetGrads(all), grad_input))
    }
}

impl Parameterized for Generator {
    fn layers(&self) -> Vec<&ConvLayer> {
        let mut v: Vec<&ConvLayer> = self.encoder.iter().collect();
        v.push(&self.bottleneck);
        v.extend(self.decoder.iter());
        v.push(&self.head);
        v
    }

    fn layers_mut(&mut self) -> Vec<&mut ConvLayer> {
        let mut v: Vec<&mut ConvLayer> = self.encoder.iter_mut().collect();
        v.push(&mut self.bottleneck);
        v.extend(self.decoder.iter_mut());
        v.push(&mut self.head);
        v
    }

    fn kind_tag(&self) -> &'static str {
        "generator"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    /// Number of stride-2 convolutions before the patch head.
    pub depth: usize,
    pub base_channels: usize,
    pub spectral_norm: bool,
    pub seed: u64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            base_channels: 16,
            spectral_norm: true,
            seed: 1,
        }
    }
}

/// Conditional patch critic over `concat(condition image, candidate image)`.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub body: Vec<ConvLayer>,
    pub head: ConvLayer,
}

pub struct DiscriminatorTrace {
    body: Vec<(ConvCache, Tensor)>,
    head: ConvCache,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig) -> Result<Self> {
        if config.depth == 0 || config.base_channels == 0 {
            return Err(Error::InvalidParam("discriminator needs >= 1 layer and channel".into()));
        }
        let mut r = rng::stream(config.seed, &[0x6464]);
        let sn = config.spectral_norm;
        let body = (0..config.depth)
            .map(|i| {
                let cin = if i == 0 { 2 } else { config.base_channels << (i - 1) };
                ConvLayer::new(format!("d{i}"), ConvKind::Forward, cin, config.base_channels << i, DOWN, sn, &mut r)
            })
            .collect();
        let last = config.base_channels << (config.depth - 1);
        let head = ConvLayer::new("dhead", ConvKind::Forward, last, 1, SAME, sn, &mut r);
        Ok(Self { config, body, head })
    }

    /// Per-patch logits, shape `(N, 1, H / 2^depth, W / 2^depth)`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, DiscriminatorTrace)> {
        if x.channels() != 2 {
            return Err(Error::Shape(format!(
                "discriminator expects 2 channels, got {:?}",
                x.shape()
            )));
        }
        let mut h = x.clone();
        let mut body = Vec::with_capacity(self.body.len());
        for layer in &self.body {
            let (pre, cache) = layer.forward(&h)?;
            h = leaky_relu(&pre, ENCODER_SLOPE);
            body.push((cache, pre));
        }
        let (logits, head) = self.head.forward(&h)?;
        Ok((logits, DiscriminatorTrace { body, head }))
    }

    pub fn backward(&self, trace: &DiscriminatorTrace, grad_logits: &Tensor) -> Result<(NetGrads, Tensor)> {
        let (mut g, head_grads) = self.head.backward(&trace.head, grad_logits)?;
        let mut grads = vec![None; self.body.len()];
        for (i, (cache, pre)) in trace.body.iter().enumerate().rev() {
            let gp = leaky_relu_backward(pre, &g, ENCODER_SLOPE);
            let (gx, lg) = self.body[i].backward(cache, &gp)?;
            grads[i] = Some(lg);
            g = gx;
        }
        let mut all: Vec<ConvGrads> = grads.into_iter().map(Option::unwrap).collect();
        all.push(head_grads);
        Ok((NetGrads(all), g))
    }
}

impl Parameterized for Discriminator {
    fn layers(&self) -> Vec<&ConvLayer> {
        let mut v: Vec<&ConvLayer> = self.body.iter().collect();
        v.push(&self.head);
        v
    }

    fn layers_mut(&mut self) -> Vec<&mut ConvLayer> {
        let mut v: Vec<&mut ConvLayer> = self.body.iter_mut().collect();
        v.push(&mut self.head);
        v
    }

    fn kind_tag(&self) -> &'static str {
        "discriminator"
    }
}
