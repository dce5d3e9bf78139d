use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::layers::{
    argmax, binary_conv1d, conv1d, conv_out_len, fc_forward, leaky_relu, maxpool1d, pool_out_len, FcLayer, KernelSet,
};
use super::tensor::Tensor1D;
use crate::error::{Error, Result};
use crate::numerics::{Arithmetic, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    /// Two real-valued convolutional layers.
    Cnn,
    /// One real-valued convolutional layer followed by two binary ones.
    Bcnn,
}

impl NetKind {
    pub fn conv_layers(self) -> usize {
        match self {
            NetKind::Cnn => 2,
            NetKind::Bcnn => 3,
        }
    }

    /// Whether conv layer `index` runs on sign bits.
    pub fn is_binary_layer(self, index: usize) -> bool {
        self == NetKind::Bcnn && index > 0
    }
}

impl fmt::Display for NetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetKind::Cnn => "cnn",
            NetKind::Bcnn => "bcnn",
        })
    }
}

impl FromStr for NetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(NetKind::Cnn),
            "bcnn" => Ok(NetKind::Bcnn),
            other => Err(Error::config(format!("unknown network kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvDims {
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
}

/// Topology without weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDims {
    pub kind: NetKind,
    pub input_channels: usize,
    pub input_length: usize,
    pub conv: Vec<ConvDims>,
    pub classes: usize,
}

impl NetworkDims {
    /// Input 1x32; conv {8, F5}, conv {16, F5}; FC -> 2.
    pub fn cnn_default() -> Self {
        NetworkDims {
            kind: NetKind::Cnn,
            input_channels: 1,
            input_length: 32,
            conv: vec![
                ConvDims {
                    out_channels: 8,
                    kernel_size: 5,
                    stride: 1,
                },
                ConvDims {
                    out_channels: 16,
                    kernel_size: 5,
                    stride: 1,
                },
            ],
            classes: 2,
        }
    }

    /// Input 1x32; real conv {8, F5}, binary conv {16, F5}, binary conv {16, F4}; FC -> 2.
    ///
    /// The last kernel is 4 wide so that the third layer still has an even
    /// (length-2) feature map to pool.
    pub fn bcnn_default() -> Self {
        NetworkDims {
            kind: NetKind::Bcnn,
            input_channels: 1,
            input_length: 32,
            conv: vec![
                ConvDims {
                    out_channels: 8,
                    kernel_size: 5,
                    stride: 1,
                },
                ConvDims {
                    out_channels: 16,
                    kernel_size: 5,
                    stride: 1,
                },
                ConvDims {
                    out_channels: 16,
                    kernel_size: 4,
                    stride: 1,
                },
            ],
            classes: 2,
        }
    }

    pub fn default_for(kind: NetKind) -> Self {
        match kind {
            NetKind::Cnn => Self::cnn_default(),
            NetKind::Bcnn => Self::bcnn_default(),
        }
    }

    /// Per-layer shapes, validating the chain.
    pub fn layer_shapes(&self) -> Result<Vec<LayerShape>> {
        if self.conv.len() != self.kind.conv_layers() {
            return Err(Error::domain(format!(
                "{} needs exactly {} conv layers, got {}",
                self.kind,
                self.kind.conv_layers(),
                self.conv.len()
            )));
        }
        if self.input_channels == 0 || self.classes < 2 {
            return Err(Error::domain("network needs >= 1 input channel and >= 2 classes"));
        }
        let mut channels = self.input_channels;
        let mut len = self.input_length;
        let mut shapes = Vec::with_capacity(self.conv.len());
        for (index, c) in self.conv.iter().enumerate() {
            if c.out_channels == 0 || c.kernel_size == 0 || c.stride == 0 {
                return Err(Error::domain(format!("conv layer {index} has a zero dimension")));
            }
            if c.kernel_size > len {
                return Err(Error::domain(format!(
                    "conv layer {index}: kernel size {} exceeds input length {len}",
                    c.kernel_size
                )));
            }
            let conv_len = conv_out_len(len, c.kernel_size, c.stride);
            let pooled_len = pool_out_len(conv_len);
            if pooled_len == 0 {
                return Err(Error::domain(format!(
                    "conv layer {index}: feature map of length {conv_len} vanishes after pooling"
                )));
            }
            shapes.push(LayerShape {
                index,
                binary: self.kind.is_binary_layer(index),
                in_channels: channels,
                in_len: len,
                out_channels: c.out_channels,
                kernel_size: c.kernel_size,
                stride: c.stride,
                conv_len,
                pooled_len,
            });
            channels = c.out_channels;
            len = pooled_len;
        }
        Ok(shapes)
    }

    pub fn fc_in_features(&self) -> Result<usize> {
        let last = *self.layer_shapes()?.last().expect("at least two layers");
        Ok(last.out_channels * last.pooled_len)
    }
}

/// Static geometry of one conv layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub index: usize,
    pub binary: bool,
    pub in_channels: usize,
    pub in_len: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    /// Feature-map length `I` before pooling.
    pub conv_len: usize,
    pub pooled_len: usize,
}

impl LayerShape {
    /// Weights feeding one output (`in_channels * F`).
    pub fn taps(&self) -> usize {
        self.in_channels * self.kernel_size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub kernels: KernelSet<T>,
    pub stride: usize,
    pub binary: bool,
}

/// Full topology plus weights. The arithmetic is the scalar type `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    kind: NetKind,
    input_channels: usize,
    input_length: usize,
    conv: Vec<ConvLayer<T>>,
    fc: FcLayer<T>,
}

/// Decision plus the raw class scores it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference<T> {
    pub decision: usize,
    pub scores: Vec<T>,
}

impl<T: Scalar> Inference<T> {
    /// Bit-level equality of scores (distinguishes `-0.0` from `0.0`).
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.decision == other.decision
            && self.scores.len() == other.scores.len()
            && self.scores.iter().zip(&other.scores).all(|(a, b)| a.bits() == b.bits())
    }
}

impl<T: Scalar> Network<T> {
    pub fn new(
        kind: NetKind,
        input_channels: usize,
        input_length: usize,
        conv: Vec<ConvLayer<T>>,
        fc: FcLayer<T>,
    ) -> Result<Self> {
        let net = Network {
            kind,
            input_channels,
            input_length,
            conv,
            fc,
        };
        net.validate()?;
        Ok(net)
    }

    /// All weights and biases zero.
    pub fn zeros(dims: &NetworkDims) -> Result<Self> {
        let shapes = dims.layer_shapes()?;
        let conv = shapes
            .iter()
            .map(|s| ConvLayer {
                kernels: KernelSet::zeros(s.out_channels, s.in_channels, s.kernel_size),
                stride: s.stride,
                binary: s.binary,
            })
            .collect();
        let fc = FcLayer::zeros(dims.fc_in_features()?, dims.classes);
        Network::new(dims.kind, dims.input_channels, dims.input_length, conv, fc)
    }

    fn validate(&self) -> Result<()> {
        let dims = self.dims();
        let shapes = dims.layer_shapes()?;
        for (layer, shape) in self.conv.iter().zip(&shapes) {
            if layer.kernels.in_channels() != shape.in_channels {
                return Err(Error::domain(format!(
                    "conv layer {} expects {} input channels, previous layer gives {}",
                    shape.index,
                    layer.kernels.in_channels(),
                    shape.in_channels
                )));
            }
            if layer.binary != shape.binary {
                return Err(Error::domain(format!(
                    "conv layer {} of a {} must {}be binary",
                    shape.index,
                    self.kind,
                    if shape.binary { "" } else { "not " }
                )));
            }
        }
        let expected = dims.fc_in_features()?;
        if self.fc.in_features() != expected {
            return Err(Error::domain(format!(
                "fc layer takes {} features, last conv layer gives {expected}",
                self.fc.in_features()
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> NetworkDims {
        NetworkDims {
            kind: self.kind,
            input_channels: self.input_channels,
            input_length: self.input_length,
            conv: self
                .conv
                .iter()
                .map(|l| ConvDims {
                    out_channels: l.kernels.out_channels(),
                    kernel_size: l.kernels.kernel_size(),
                    stride: l.stride,
                })
                .collect(),
            classes: self.fc.out_classes(),
        }
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        self.dims().layer_shapes().expect("validated at construction")
    }

    pub fn arithmetic(&self) -> Arithmetic {
        T::arithmetic()
    }

    /// Re-expresses every parameter in another arithmetic (quantizing for fixed point).
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            kind: self.kind,
            input_channels: self.input_channels,
            input_length: self.input_length,
            conv: self
                .conv
                .iter()
                .map(|l| ConvLayer {
                    kernels: l.kernels.cast(),
                    stride: l.stride,
                    binary: l.binary,
                })
                .collect(),
            fc: self.fc.cast(),
        }
    }

    pub fn check_input(&self, x: &Tensor1D<T>) -> Result<()> {
        if x.channels() != self.input_channels || x.length() != self.input_length {
            return Err(Error::domain(format!(
                "network expects a {}x{} input, got {}x{}",
                self.input_channels,
                self.input_length,
                x.channels(),
                x.length()
            )));
        }
        Ok(())
    }

    /// Reference evaluation: per layer conv (or binary conv), Leaky-ReLU, max-pool;
    /// then the FC layer and an argmax.
    pub fn forward(&self, x: &Tensor1D<T>) -> Result<Inference<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.conv {
            let z = if layer.binary {
                binary_conv1d(&h, &layer.kernels, layer.stride)?
            } else {
                conv1d(&h, &layer.kernels, layer.stride)?
            };
            h = maxpool1d(&leaky_relu(&z));
        }
        let scores = fc_forward(h.as_slice(), &self.fc)?;
        Ok(Inference {
            decision: argmax(&scores),
            scores,
        })
    }
}

impl<T> Network<T> {
    pub fn kind(&self) -> NetKind {
        self.kind
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn input_length(&self) -> usize {
        self.input_length
    }

    pub fn conv_layers(&self) -> &[ConvLayer<T>] {
        &self.conv
    }

    pub fn fc(&self) -> &FcLayer<T> {
        &self.fc
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [ConvLayer<T>], &mut FcLayer<T>) {
        (&mut self.conv, &mut self.fc)
    }

    /// Weights plus biases over all layers.
    pub fn parameter_count(&self) -> usize {
        self.conv
            .iter()
            .map(|l| l.kernels.weights().len() + l.kernels.bias().len())
            .sum::<usize>()
            + self.fc.weights().len()
            + self.fc.bias().len()
    }
}
