use std::borrow::Cow;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::checkpoint::{Block, Checkpoint};
use super::conv::{
    conv2d_backward, conv2d_forward, conv_transpose2d_backward, conv_transpose2d_forward,
    ConvSpec,
};
use super::spectral::{spectral_backward, SpectralFactors, SpectralState};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvKind {
    /// Weight `(out, in, kh, kw)`.
    Forward,
    /// Weight `(in, out, kh, kw)`.
    Transposed,
}

/// A convolution (or transposed convolution) with bias and optional
/// spectral normalization of its weight. The normalization matrix is the
/// kernel reshaped to `(shape[0], rest)`.
#[derive(Debug, Clone)]
pub struct ConvLayer {
    pub name: String,
    pub kind: ConvKind,
    pub spec: ConvSpec,
    pub shape: [usize; 4],
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub spectral: Option<SpectralState>,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    input: Tensor,
    weight: Option<(Vec<f64>, SpectralFactors)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvGrads {
    pub fn zeros_like(layer: &ConvLayer) -> Self {
        Self {
            weight: vec![0.0; layer.weight.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub fn accumulate(&mut self, other: &ConvGrads) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }
}

impl ConvLayer {
    /// He-normal weights, zero bias.
    pub fn new(
        name: impl Into<String>,
        kind: ConvKind,
        in_ch: usize,
        out_ch: usize,
        spec: ConvSpec,
        spectral: bool,
        rng: &mut Rng,
    ) -> Self {
        let shape = match kind {
            ConvKind::Forward => [out_ch, in_ch, spec.kh, spec.kw],
            ConvKind::Transposed => [in_ch, out_ch, spec.kh, spec.kw],
        };
        let fan_in = (in_ch * spec.kh * spec.kw) as f64;
        let std = (2.0 / fan_in).sqrt();
        let weight = (0..shape.iter().product::<usize>())
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let rows = shape[0];
        let cols = shape[1] * shape[2] * shape[3];
        let spectral = spectral.then(|| SpectralState::new(rows, cols, rng));
        Self {
            name: name.into(),
            kind,
            spec,
            shape,
            weight,
            bias: vec![0.0; out_ch],
            spectral,
        }
    }

    pub fn in_channels(&self) -> usize {
        match self.kind {
            ConvKind::Forward => self.shape[1],
            ConvKind::Transposed => self.shape[0],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.bias.len()
    }

    /// One power-iteration round (training steps call this before `forward`).
    pub fn power_iterate(&mut self, iters: usize) {
        if let Some(st) = &mut self.spectral {
            st.iterate(&self.weight, iters);
        }
    }

    fn effective_weight(&self) -> (Cow<'_, [f64]>, Option<(Vec<f64>, SpectralFactors)>) {
        match &self.spectral {
            None => (Cow::Borrowed(&self.weight), None),
            Some(st) => {
                let f = st.factors(&self.weight);
                let wn: Vec<f64> = self.weight.iter().map(|w| w / f.sigma).collect();
                (Cow::Owned(wn.clone()), Some((wn, f)))
            }
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        let (w, sn) = self.effective_weight();
        let y = match self.kind {
            ConvKind::Forward => conv2d_forward(x, &w, self.shape, Some(&self.bias), self.spec),
            ConvKind::Transposed => {
                conv_transpose2d_forward(x, &w, self.shape, Some(&self.bias), self.spec)
            }
        }?;
        debug_assert!(
            !x.all_finite() || self.weight.iter().chain(&self.bias).any(|v| !v.is_finite()) || y.all_finite(),
            "{} produced a non-finite value from finite inputs",
            self.name
        );
        Ok((
            y,
            ConvCache {
                input: x.clone(),
                weight: sn,
            },
        ))
    }

    pub fn backward(&self, cache: &ConvCache, grad_out: &Tensor) -> Result<(Tensor, ConvGrads)> {
        let w: &[f64] = match &cache.weight {
            Some((wn, _)) => wn,
            None => &self.weight,
        };
        let (gx, gw, gb) = match self.kind {
            ConvKind::Forward => conv2d_backward(grad_out, &cache.input, w, self.shape, self.spec),
            ConvKind::Transposed => {
                conv_transpose2d_backward(grad_out, &cache.input, w, self.shape, self.spec)
            }
        }?;
        let gw = match &cache.weight {
            Some((wn, f)) => spectral_backward(&gw, wn, f),
            None => gw,
        };
        Ok((gx, ConvGrads { weight: gw, bias: gb }))
    }

    pub fn describe(&self) -> String {
        format!(
            "{}:{:?}:{:?}:k{}x{}s{}p{}:sn={}",
            self.name,
            self.kind,
            self.shape,
            self.spec.kh,
            self.spec.kw,
            self.spec.stride,
            self.spec.pad,
            self.spectral.is_some()
        )
    }

    pub fn blocks(&self) -> Vec<Block> {
        let mut out = vec![
            Block {
                name: format!("{}.weight", self.name),
                shape: self.shape.to_vec(),
                data: self.weight.clone(),
            },
            Block {
                name: format!("{}.bias", self.name),
                shape: vec![self.bias.len()],
                data: self.bias.clone(),
            },
        ];
        if let Some(st) = &self.spectral {
            out.push(Block {
                name: format!("{}.sn_u", self.name),
                shape: vec![st.u().len()],
                data: st.u().to_vec(),
            });
        }
        out
    }

    pub fn load_blocks(&mut self, ck: &Checkpoint) -> Result<()> {
        let fetch = |suffix: &str, len: usize| -> Result<Vec<f64>> {
            let name = format!("{}.{suffix}", self.name);
            let b = ck
                .block(&name)
                .ok_or_else(|| Error::Shape(format!("checkpoint lacks block {name}")))?;
            if b.data.len() != len {
                return Err(Error::Shape(format!(
                    "block {name} has {} values, layer needs {len}",
                    b.data.len()
                )));
            }
            Ok(b.data.clone())
        };
        self.weight = fetch("weight", self.weight.len())?;
        self.bias = fetch("bias", self.bias.len())?;
        if let Some(st) = &self.spectral {
            let (rows, cols) = st.dims();
            self.spectral = Some(SpectralState::from_u(rows, cols, fetch("sn_u", rows)?));
        }
        Ok(())
    }
}
