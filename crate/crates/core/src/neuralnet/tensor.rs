use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense NCHW tensor of doubles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn full(shape: [usize; 4], v: f64) -> Self {
        Self {
            shape,
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "{} values for tensor shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    /// Elements per batch sample.
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn sample(&self, n: usize) -> &[f64] {
        let l = self.sample_len();
        &self.data[n * l..(n + 1) * l]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [f64] {
        let l = self.sample_len();
        &mut self.data[n * l..(n + 1) * l]
    }

    /// One channel plane of one sample.
    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let hw = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * hw;
        &self.data[start..start + hw]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Tensor {
        self.map(|v| a * v)
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape, "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stacks samples along the batch axis.
    pub fn stack(samples: &[Tensor]) -> Result<Tensor> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Shape("cannot stack zero tensors".into()))?;
        let [_, c, h, w] = first.shape;
        let mut data = Vec::with_capacity(samples.len() * first.sample_len());
        let mut n = 0;
        for s in samples {
            if s.shape[1..] != [c, h, w] {
                return Err(Error::Shape(format!(
                    "stack: {:?} vs {:?}",
                    s.shape, first.shape
                )));
            }
            data.extend_from_slice(&s.data);
            n += s.shape[0];
        }
        Ok(Tensor {
            shape: [n, c, h, w],
            data,
        })
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let [n, ca, h, w] = a.shape;
        let [nb, cb, hb, wb] = b.shape;
        if (n, h, w) != (nb, hb, wb) {
            return Err(Error::Shape(format!(
                "concat: {:?} vs {:?}",
                a.shape, b.shape
            )));
        }
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        for i in 0..n {
            data.extend_from_slice(a.sample(i));
            data.extend_from_slice(b.sample(i));
        }
        Ok(Tensor {
            shape: [n, ca + cb, h, w],
            data,
        })
    }

    /// Inverse of [`Tensor::concat_channels`]: splits off the first `ca` channels.
    pub fn split_channels(&self, ca: usize) -> (Tensor, Tensor) {
        let [n, c, h, w] = self.shape;
        assert!(ca <= c);
        let hw = h * w;
        let mut a = Vec::with_capacity(n * ca * hw);
        let mut b = Vec::with_capacity(n * (c - ca) * hw);
        for i in 0..n {
            let s = self.sample(i);
            a.extend_from_slice(&s[..ca * hw]);
            b.extend_from_slice(&s[ca * hw..]);
        }
        (
            Tensor {
                shape: [n, ca, h, w],
                data: a,
            },
            Tensor {
                shape: [n, c - ca, h, w],
                data: b,
            },
        )
    }

    /// Keeps only channels `[from, from + count)`.
    pub fn select_channels(&self, from: usize, count: usize) -> Tensor {
        let [n, c, h, w] = self.shape;
        assert!(from + count <= c);
        let hw = h * w;
        let mut data = Vec::with_capacity(n * count * hw);
        for i in 0..n {
            data.extend_from_slice(&self.sample(i)[from * hw..(from + count) * hw]);
        }
        Tensor {
            shape: [n, count, h, w],
            data,
        }
    }
}
