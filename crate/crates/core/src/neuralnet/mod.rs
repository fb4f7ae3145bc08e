//! A deliberately small neural-network engine: NCHW f64 tensors,
//! convolution and transposed convolution with hand-written backward
//! passes, pointwise activations, dropout, spectral normalization, Adam,
//! and a binary checkpoint format.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod layer;
pub mod spectral;
pub mod tensor;

pub use activation::{
    dropout, dropout_backward, leaky_relu, leaky_relu_backward, relu, relu_backward, sigmoid,
    sigmoid_backward, sigmoid_scalar, softplus, ENCODER_SLOPE,
};
pub use adam::{Adam, AdamConfig};
pub use checkpoint::{fnv1a64, Block, Checkpoint};
pub use conv::{
    conv2d_backward, conv2d_forward, conv_transpose2d_backward, conv_transpose2d_forward,
    ConvSpec,
};
pub use layer::{ConvCache, ConvGrads, ConvKind, ConvLayer};
pub use spectral::{spectral_backward, spectral_normalize, SpectralFactors, SpectralState};
pub use tensor::Tensor;
