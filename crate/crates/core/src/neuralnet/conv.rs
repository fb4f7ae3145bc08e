//! Convolution and transposed convolution over NCHW tensors via
//! im2col / col2im and dense matrix products.
//!
//! Weight layouts:
//! - convolution: `(out_ch, in_ch, kh, kw)`
//! - transposed convolution: `(in_ch, out_ch, kh, kw)`, so that its forward
//!   pass is exactly the input-gradient of a convolution with the same array.

use crate::error::{Error, Result};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvSpec {
    pub const fn new(k: usize, stride: usize, pad: usize) -> Self {
        Self {
            kh: k,
            kw: k,
            stride,
            pad,
        }
    }

    /// Output size of a convolution over an `h x w` input.
    pub fn conv_out(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.pad, w + 2 * self.pad);
        if self.stride == 0 || hp < self.kh || wp < self.kw {
            return Err(Error::Shape(format!(
                "kernel {}x{} stride {} does not fit padded input {hp}x{wp}",
                self.kh, self.kw, self.stride
            )));
        }
        Ok((
            (hp - self.kh) / self.stride + 1,
            (wp - self.kw) / self.stride + 1,
        ))
    }

    /// Output size of a transposed convolution over an `h x w` input.
    pub fn transpose_out(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let oh = ((h.max(1) - 1) * self.stride + self.kh).checked_sub(2 * self.pad);
        let ow = ((w.max(1) - 1) * self.stride + self.kw).checked_sub(2 * self.pad);
        match (oh, ow) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 && h > 0 && w > 0 && self.stride > 0 => {
                Ok((oh, ow))
            }
            _ => Err(Error::Shape(format!(
                "transposed kernel {}x{} stride {} pad {} on {h}x{w}",
                self.kh, self.kw, self.stride, self.pad
            ))),
        }
    }
}

/// Geometry linking an image of `c x h x w` to its column matrix of
/// `(c * kh * kw) x (oh * ow)`.
#[derive(Debug, Clone, Copy)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    spec: ConvSpec,
}

impl Geom {
    fn rows(&self) -> usize {
        self.c * self.spec.kh * self.spec.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }
}

fn im2col(img: &[f64], g: &Geom, cols: &mut [f64]) {
    let ConvSpec { kh, kw, stride, pad } = g.spec;
    let ncols = g.cols();
    for c in 0..g.c {
        let plane = &img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..kh {
            for j in 0..kw {
                let row = &mut cols[((c * kh + i) * kw + j) * ncols..][..ncols];
                for oy in 0..g.oh {
                    let y = (oy * stride + i) as isize - pad as isize;
                    let out = &mut row[oy * g.ow..(oy + 1) * g.ow];
                    if y < 0 || y >= g.h as isize {
                        out.fill(0.0);
                        continue;
                    }
                    let src = &plane[y as usize * g.w..(y as usize + 1) * g.w];
                    for (ox, o) in out.iter_mut().enumerate() {
                        let x = (ox * stride + j) as isize - pad as isize;
                        *o = if x < 0 || x >= g.w as isize {
                            0.0
                        } else {
                            src[x as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-adds a column matrix back into an image (adjoint of [`im2col`]).
fn col2im(cols: &[f64], g: &Geom, img: &mut [f64]) {
    let ConvSpec { kh, kw, stride, pad } = g.spec;
    let ncols = g.cols();
    for c in 0..g.c {
        let plane = &mut img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..kh {
            for j in 0..kw {
                let row = &cols[((c * kh + i) * kw + j) * ncols..][..ncols];
                for oy in 0..g.oh {
                    let y = (oy * stride + i) as isize - pad as isize;
                    if y < 0 || y >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[y as usize * g.w..(y as usize + 1) * g.w];
                    for (ox, &v) in row[oy * g.ow..(oy + 1) * g.ow].iter().enumerate() {
                        let x = (ox * stride + j) as isize - pad as isize;
                        if x >= 0 && x < g.w as isize {
                            dst[x as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// `c = beta * c + op(a) * op(b)` for row-major matrices, `op(a)` being `m x k`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices hold at least m*k, k*n and m*n elements and the
    // strides describe row-major (or transposed) layouts inside them.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check_weight(len: usize, shape: [usize; 4]) -> Result<()> {
    if len != shape.iter().product::<usize>() {
        return Err(Error::Shape(format!(
            "{len} weights for kernel shape {shape:?}"
        )));
    }
    Ok(())
}

fn add_bias(y: &mut Tensor, bias: Option<&[f64]>) -> Result<()> {
    if let Some(b) = bias {
        let [n, c, h, w] = y.shape();
        if b.len() != c {
            return Err(Error::Shape(format!("{} biases for {c} channels", b.len())));
        }
        for i in 0..n {
            let s = y.sample_mut(i);
            for (ch, &bv) in b.iter().enumerate() {
                for v in &mut s[ch * h * w..(ch + 1) * h * w] {
                    *v += bv;
                }
            }
        }
    }
    Ok(())
}

fn bias_grad(gy: &Tensor) -> Vec<f64> {
    let [n, c, _, _] = gy.shape();
    let mut gb = vec![0.0; c];
    for i in 0..n {
        for (ch, g) in gb.iter_mut().enumerate() {
            *g += gy.plane(i, ch).iter().sum::<f64>();
        }
    }
    gb
}

/// Cross-correlation with zero padding.
pub fn conv2d_forward(
    x: &Tensor,
    weight: &[f64],
    wshape: [usize; 4],
    bias: Option<&[f64]>,
    spec: ConvSpec,
) -> Result<Tensor> {
    check_weight(weight.len(), wshape)?;
    let [n, c, h, w] = x.shape();
    let [o, wc, kh, kw] = wshape;
    if wc != c || (kh, kw) != (spec.kh, spec.kw) {
        return Err(Error::Shape(format!(
            "conv input {:?} vs kernel {wshape:?}",
            x.shape()
        )));
    }
    let (oh, ow) = spec.conv_out(h, w)?;
    let g = Geom {
        c,
        h,
        w,
        oh,
        ow,
        spec,
    };
    let mut y = Tensor::zeros([n, o, oh, ow]);
    let mut cols = vec![0.0; g.rows() * g.cols()];
    for i in 0..n {
        im2col(x.sample(i), &g, &mut cols);
        gemm(o, g.rows(), g.cols(), weight, false, &cols, false, 0.0, y.sample_mut(i));
    }
    add_bias(&mut y, bias)?;
    Ok(y)
}

/// Gradients `(grad_x, grad_weight, grad_bias)` of [`conv2d_forward`].
pub fn conv2d_backward(
    grad_out: &Tensor,
    x: &Tensor,
    weight: &[f64],
    wshape: [usize; 4],
    spec: ConvSpec,
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    check_weight(weight.len(), wshape)?;
    let [n, c, h, w] = x.shape();
    let [o, _, _, _] = wshape;
    let (oh, ow) = spec.conv_out(h, w)?;
    if grad_out.shape() != [n, o, oh, ow] {
        return Err(Error::Shape(format!(
            "conv grad {:?}, expected {:?}",
            grad_out.shape(),
            [n, o, oh, ow]
        )));
    }
    let g = Geom {
        c,
        h,
        w,
        oh,
        ow,
        spec,
    };
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = vec![0.0; weight.len()];
    let mut cols = vec![0.0; g.rows() * g.cols()];
    let mut dcols = vec![0.0; g.rows() * g.cols()];
    for i in 0..n {
        im2col(x.sample(i), &g, &mut cols);
        let gy = grad_out.sample(i);
        gemm(o, g.cols(), g.rows(), gy, false, &cols, true, 1.0, &mut gw);
        gemm(g.rows(), o, g.cols(), weight, true, gy, false, 0.0, &mut dcols);
        col2im(&dcols, &g, gx.sample_mut(i));
    }
    Ok((gx, gw, bias_grad(grad_out)))
}

/// Transposed convolution (fractionally strided), weight `(in_ch, out_ch, kh, kw)`.
pub fn conv_transpose2d_forward(
    x: &Tensor,
    weight: &[f64],
    wshape: [usize; 4],
    bias: Option<&[f64]>,
    spec: ConvSpec,
) -> Result<Tensor> {
    check_weight(weight.len(), wshape)?;
    let [n, c, h, w] = x.shape();
    let [wc, o, kh, kw] = wshape;
    if wc != c || (kh, kw) != (spec.kh, spec.kw) {
        return Err(Error::Shape(format!(
            "transposed conv input {:?} vs kernel {wshape:?}",
            x.shape()
        )));
    }
    let (oh, ow) = spec.transpose_out(h, w)?;
    // the column side of the geometry is the (small) input
    let g = Geom {
        c: o,
        h: oh,
        w: ow,
        oh: h,
        ow: w,
        spec,
    };
    if spec.conv_out(oh, ow)? != (h, w) {
        return Err(Error::Shape("transposed conv geometry is not invertible".into()));
    }
    let mut y = Tensor::zeros([n, o, oh, ow]);
    let mut cols = vec![0.0; g.rows() * g.cols()];
    for i in 0..n {
        gemm(g.rows(), c, g.cols(), weight, true, x.sample(i), false, 0.0, &mut cols);
        col2im(&cols, &g, y.sample_mut(i));
    }
    add_bias(&mut y, bias)?;
    Ok(y)
}

/// Gradients `(grad_x, grad_weight, grad_bias)` of [`conv_transpose2d_forward`].
pub fn conv_transpose2d_backward(
    grad_out: &Tensor,
    x: &Tensor,
    weight: &[f64],
    wshape: [usize; 4],
    spec: ConvSpec,
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    check_weight(weight.len(), wshape)?;
    let [n, c, h, w] = x.shape();
    let [_, o, _, _] = wshape;
    let (oh, ow) = spec.transpose_out(h, w)?;
    if grad_out.shape() != [n, o, oh, ow] {
        return Err(Error::Shape(format!(
            "transposed conv grad {:?}, expected {:?}",
            grad_out.shape(),
            [n, o, oh, ow]
        )));
    }
    let g = Geom {
        c: o,
        h: oh,
        w: ow,
        oh: h,
        ow: w,
        spec,
    };
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = vec![0.0; weight.len()];
    let mut gcols = vec![0.0; g.rows() * g.cols()];
    for i in 0..n {
        im2col(grad_out.sample(i), &g, &mut gcols);
        gemm(c, g.rows(), g.cols(), weight, false, &gcols, false, 0.0, gx.sample_mut(i));
        gemm(c, g.cols(), g.rows(), x.sample(i), false, &gcols, true, 1.0, &mut gw);
    }
    Ok((gx, gw, bias_grad(grad_out)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_kernel_sums_window() {
        let x = Tensor::full([1, 1, 3, 3], 1.0);
        let y = conv2d_forward(&x, &[1.0; 9], [1, 1, 3, 3], Some(&[0.5]), ConvSpec::new(3, 1, 0)).unwrap();
        assert_eq!(y.shape(), [1, 1, 1, 1]);
        assert_eq!(y.data()[0], 9.5);
    }

    #[test]
    fn unit_kernel_is_identity() {
        let x = Tensor::from_vec([2, 1, 2, 3], (0..12).map(f64::from).collect()).unwrap();
        let y = conv2d_forward(&x, &[1.0], [1, 1, 1, 1], Some(&[0.0]), ConvSpec::new(1, 1, 0)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn shape_arithmetic() {
        let s = ConvSpec::new(4, 2, 1);
        assert_eq!(s.conv_out(64, 64).unwrap(), (32, 32));
        assert_eq!(s.transpose_out(32, 32).unwrap(), (64, 64));
        assert!(ConvSpec::new(5, 1, 0).conv_out(3, 3).is_err());
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let x = Tensor::zeros([1, 2, 4, 4]);
        assert!(conv2d_forward(&x, &[0.0; 9], [1, 1, 3, 3], None, ConvSpec::new(3, 1, 1)).is_err());
    }
}
