//! Layer and network semantics: convolution, binary convolution, max-pooling,
//! Leaky-ReLU activation and the fully-connected decision layer.

mod layers;
mod network;
mod tensor;
pub mod weights_file;

pub(crate) use layers::window_signs;
pub use layers::{
    argmax, binary_conv1d, binary_conv1d_xnor, conv1d, conv_out_len, conv_point, fc_forward, leaky_relu, maxpool1d,
    pool_out_len, sign_mac_score, FcLayer, KernelSet, SignBits, POOL_WINDOW,
};
pub use network::{ConvDims, ConvLayer, Inference, LayerShape, NetKind, Network, NetworkDims};
pub use tensor::Tensor1D;
