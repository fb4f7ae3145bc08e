use rand::Rng as _;

use crate::rng::Rng;

use super::tensor::Tensor;

pub const ENCODER_SLOPE: f64 = 0.2;

/// Leaky ReLU; `slope = 0` gives a plain ReLU.
pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { slope * v })
}

/// Gradient of [`leaky_relu`] given its input.
pub fn leaky_relu_backward(x: &Tensor, grad_out: &Tensor, slope: f64) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { slope * g })
        .collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

pub fn relu(x: &Tensor) -> Tensor {
    leaky_relu(x, 0.0)
}

pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    leaky_relu_backward(x, grad_out, 0.0)
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

/// Gradient of [`sigmoid`] given its output.
pub fn sigmoid_backward(y: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = y
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&s, &g)| g * s * (1.0 - s))
        .collect();
    Tensor::from_vec(y.shape(), data).expect("same shape")
}

/// Numerically stable `ln(1 + e^v)`.
pub fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Inverted dropout. Returns the output and the per-element scale that was
/// applied (`None` when inactive, in which case the output is `x` itself).
pub fn dropout(x: &Tensor, rate: f64, rng: &mut Rng, active: bool) -> (Tensor, Option<Vec<f64>>) {
    assert!((0.0..1.0).contains(&rate), "dropout rate {rate} outside [0, 1)");
    if !active || rate == 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 / (1.0 - rate);
    let scale: Vec<f64> = (0..x.data().len())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let data = x.data().iter().zip(&scale).map(|(v, s)| v * s).collect();
    (Tensor::from_vec(x.shape(), data).expect("same shape"), Some(scale))
}

pub fn dropout_backward(grad_out: &Tensor, scale: Option<&[f64]>) -> Tensor {
    match scale {
        None => grad_out.clone(),
        Some(s) => {
            let data = grad_out.data().iter().zip(s).map(|(g, s)| g * s).collect();
            Tensor::from_vec(grad_out.shape(), data).expect("same shape")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn sigmoid_of_zero_is_half() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert!(sigmoid_scalar(-800.0).is_finite());
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn dropout_rate_zero_and_inactive_are_identity() {
        let x = Tensor::from_vec([1, 1, 2, 2], vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        assert_eq!(dropout(&x, 0.0, &mut seeded(1), true).0, x);
        assert_eq!(dropout(&x, 0.5, &mut seeded(1), false).0, x);
    }

    #[test]
    fn dropout_is_seed_deterministic_and_rescales() {
        let x = Tensor::full([1, 4, 8, 8], 1.0);
        let (a, sa) = dropout(&x, 0.5, &mut seeded(7), true);
        let (b, _) = dropout(&x, 0.5, &mut seeded(7), true);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| v == 0.0 || v == 2.0));
        let dropped = sa.unwrap().iter().filter(|&&s| s == 0.0).count();
        assert!(dropped > 60 && dropped < 196, "{dropped}");
    }

    #[test]
    fn leaky_relu_slopes() {
        let x = Tensor::from_vec([1, 1, 1, 2], vec![-1.0, 2.0]).unwrap();
        assert_eq!(leaky_relu(&x, ENCODER_SLOPE).data(), &[-0.2, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 2.0]);
    }
}
