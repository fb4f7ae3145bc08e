//! Spectral normalization by power iteration with a persistent left vector.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;

/// Floor applied to the singular value estimate so a zero matrix stays finite.
pub const SIGMA_FLOOR: f64 = 1e-12;

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// `W^T u` for row-major `W` of shape `rows x cols`.
fn mul_t(w: &[f64], rows: usize, cols: usize, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (r, &ur) in u.iter().enumerate().take(rows) {
        for (o, &wv) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *o += ur * wv;
        }
    }
    out
}

fn mul(w: &[f64], cols: usize, v: &[f64]) -> Vec<f64> {
    w.chunks_exact(cols)
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Persistent power-iteration state for one weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    rows: usize,
    cols: usize,
    u: Vec<f64>,
}

/// Quantities of one normalization, needed for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactors {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SpectralState {
    /// Random unit `u` of length `rows`.
    pub fn new(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let mut u: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut u) == 0.0 {
            u[0] = 1.0;
        }
        Self { rows, cols, u }
    }

    pub fn from_u(rows: usize, cols: usize, u: Vec<f64>) -> Self {
        assert_eq!(u.len(), rows);
        Self { rows, cols, u }
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `iters` rounds of `v <- W^T u / |.|`, `u <- W v / |.|`.
    pub fn iterate(&mut self, w: &[f64], iters: usize) {
        debug_assert_eq!(w.len(), self.rows * self.cols);
        for _ in 0..iters {
            let mut v = mul_t(w, self.rows, self.cols, &self.u);
            if normalize(&mut v) == 0.0 {
                return;
            }
            let mut u = mul(w, self.cols, &v);
            if normalize(&mut u) == 0.0 {
                return;
            }
            self.u = u;
        }
    }

    /// Current estimate without advancing the iteration: `v = W^T u / |W^T u|`,
    /// `sigma = u^T W v`.
    pub fn factors(&self, w: &[f64]) -> SpectralFactors {
        let mut v = mul_t(w, self.rows, self.cols, &self.u);
        let norm = normalize(&mut v);
        SpectralFactors {
            sigma: norm.max(SIGMA_FLOOR),
            u: self.u.clone(),
            v,
        }
    }
}

/// Runs `iters` power iterations, then returns `W / sigma` and the factors used.
pub fn spectral_normalize(
    w: &[f64],
    state: &mut SpectralState,
    iters: usize,
) -> (Vec<f64>, SpectralFactors) {
    state.iterate(w, iters);
    let f = state.factors(w);
    (w.iter().map(|x| x / f.sigma).collect(), f)
}

/// Maps a gradient with respect to `W / sigma` back to `W`, holding `u` fixed:
/// `dW = (G - <G, Wn> u v^T) / sigma`.
pub fn spectral_backward(grad_wn: &[f64], wn: &[f64], f: &SpectralFactors) -> Vec<f64> {
    let inner: f64 = grad_wn.iter().zip(wn).map(|(a, b)| a * b).sum();
    let cols = f.v.len();
    grad_wn
        .iter()
        .enumerate()
        .map(|(i, g)| (g - inner * f.u[i / cols] * f.v[i % cols]) / f.sigma)
        .collect()
}
