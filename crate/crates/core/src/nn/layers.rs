//! Layer semantics, independent of any hardware schedule.

use super::tensor::Tensor1D;
use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// Max-pooling window. Also the stride: windows never overlap.
pub const POOL_WINDOW: usize = 2;

/// Number of convolution output positions for input length `input_len`.
pub fn conv_out_len(input_len: usize, kernel_size: usize, stride: usize) -> usize {
    if input_len < kernel_size || stride == 0 {
        0
    } else {
        (input_len - kernel_size) / stride + 1
    }
}

/// Pooled length; a trailing odd element is dropped.
pub fn pool_out_len(len: usize) -> usize {
    len / POOL_WINDOW
}

/// `N` kernels over `in_channels` channels of width `F`, plus one bias per kernel.
/// Weights are stored `[m][n][f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet<T> {
    out_channels: usize,
    in_channels: usize,
    kernel_size: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Scalar> KernelSet<T> {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || kernel_size == 0 {
            return Err(Error::domain(format!(
                "kernel set dims must be positive, got {out_channels}x{in_channels}x{kernel_size}"
            )));
        }
        if weights.len() != out_channels * in_channels * kernel_size {
            return Err(Error::domain(format!(
                "kernel set {out_channels}x{in_channels}x{kernel_size} needs {} weights, got {}",
                out_channels * in_channels * kernel_size,
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::domain(format!(
                "kernel set needs {out_channels} biases, got {}",
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite kernel parameter"));
        }
        Ok(KernelSet {
            out_channels,
            in_channels,
            kernel_size,
            weights,
            bias,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel_size: usize) -> Self {
        KernelSet {
            out_channels,
            in_channels,
            kernel_size,
            weights: vec![T::zero(); out_channels * in_channels * kernel_size],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn cast<U: Scalar>(&self) -> KernelSet<U> {
        KernelSet {
            out_channels: self.out_channels,
            in_channels: self.in_channels,
            kernel_size: self.kernel_size,
            weights: self.weights.iter().map(|v| U::from_f32(v.to_f32())).collect(),
            bias: self.bias.iter().map(|v| U::from_f32(v.to_f32())).collect(),
        }
    }
}

impl<T> KernelSet<T> {
    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.weights, &mut self.bias)
    }

    /// The `F` taps of kernel `m` on input channel `n`.
    #[inline]
    pub fn taps(&self, m: usize, n: usize) -> &[T] {
        let start = (m * self.in_channels + n) * self.kernel_size;
        &self.weights[start..start + self.kernel_size]
    }

    /// All `in_channels * F` weights of kernel `m`, channel-major.
    #[inline]
    pub fn kernel(&self, m: usize) -> &[T] {
        let len = self.in_channels * self.kernel_size;
        &self.weights[m * len..(m + 1) * len]
    }
}

pub(crate) fn check_conv_shapes<T>(x: &Tensor1D<T>, k: &KernelSet<T>, stride: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::domain("convolution stride must be >= 1"));
    }
    if x.channels() != k.in_channels() {
        return Err(Error::domain(format!(
            "input has {} channels, kernels expect {}",
            x.channels(),
            k.in_channels()
        )));
    }
    if x.length() < k.kernel_size() {
        return Err(Error::domain(format!(
            "input length {} shorter than kernel size {}",
            x.length(),
            k.kernel_size()
        )));
    }
    Ok(conv_out_len(x.length(), k.kernel_size(), stride))
}

/// One output of the real-valued convolution in canonical order:
/// bias first, then input channels ascending, taps ascending within a channel.
#[inline]
pub fn conv_point<T: Scalar>(x: &Tensor1D<T>, k: &KernelSet<T>, m: usize, i: usize, stride: usize) -> T {
    let mut acc = k.bias()[m];
    for n in 0..k.in_channels() {
        let window = &x.channel(n)[stride * i..stride * i + k.kernel_size()];
        for (&xv, &kv) in window.iter().zip(k.taps(m, n)) {
            acc = acc + xv * kv;
        }
    }
    acc
}

/// Integer score `sum msb(x) * msb(k)` of one binary-convolution output,
/// accumulated as a sign multiply-accumulate.
#[inline]
pub fn sign_mac_score<T: Scalar>(x: &Tensor1D<T>, k: &KernelSet<T>, m: usize, i: usize, stride: usize) -> i32 {
    let mut score = 0i32;
    for n in 0..k.in_channels() {
        let window = &x.channel(n)[stride * i..stride * i + k.kernel_size()];
        for (&xv, &kv) in window.iter().zip(k.taps(m, n)) {
            score += xv.msb() * kv.msb();
        }
    }
    score
}

/// `out[m][i] = B[m] + sum_n sum_f x[n][S*i + f] * K[m][n][f]`.
pub fn conv1d<T: Scalar>(x: &Tensor1D<T>, k: &KernelSet<T>, stride: usize) -> Result<Tensor1D<T>> {
    let out_len = check_conv_shapes(x, k, stride)?;
    let mut data = Vec::with_capacity(k.out_channels() * out_len);
    for m in 0..k.out_channels() {
        for i in 0..out_len {
            data.push(conv_point(x, k, m, i, stride));
        }
    }
    Ok(Tensor1D::from_parts_unchecked(k.out_channels(), out_len, data))
}

/// Binary convolution on sign bits, sign-MAC form. The integer score is exact,
/// so the only rounding step is the final `B + score`.
pub fn binary_conv1d<T: Scalar>(x: &Tensor1D<T>, k: &KernelSet<T>, stride: usize) -> Result<Tensor1D<T>> {
    let out_len = check_conv_shapes(x, k, stride)?;
    let mut data = Vec::with_capacity(k.out_channels() * out_len);
    for m in 0..k.out_channels() {
        for i in 0..out_len {
            data.push(k.bias()[m] + T::from_score(sign_mac_score(x, k, m, i, stride)));
        }
    }
    Ok(Tensor1D::from_parts_unchecked(k.out_channels(), out_len, data))
}

/// Packed sign bits, bit set where the sign bit of the value is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignBits {
    words: Vec<u64>,
    len: usize,
}

impl SignBits {
    pub fn pack<T: Scalar>(values: impl IntoIterator<Item = T>) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for v in values {
            if len % 64 == 0 {
                words.push(0);
            }
            if v.sign_bit() {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        SignBits { words, len }
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert!(words.len() * 64 >= len);
        SignBits { words, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `2 * popcount(XNOR(a, b)) - len`.
    pub fn xnor_score(&self, other: &SignBits) -> i32 {
        assert_eq!(self.len, other.len, "sign windows differ in length");
        let mut agree = 0u32;
        for (w, (&a, &b)) in self.words.iter().zip(&other.words).enumerate() {
            let valid = self.len - w * 64;
            let mask = if valid >= 64 { u64::MAX } else { (1u64 << valid) - 1 };
            agree += (!(a ^ b) & mask).count_ones();
        }
        2 * agree as i32 - self.len as i32
    }
}

/// Binary convolution, XNOR/popcount form. Agrees exactly with [`binary_conv1d`].
pub fn binary_conv1d_xnor<T: Scalar>(x: &Tensor1D<T>, k: &KernelSet<T>, stride: usize) -> Result<Tensor1D<T>> {
    let out_len = check_conv_shapes(x, k, stride)?;
    let kernels: Vec<SignBits> = (0..k.out_channels())
        .map(|m| SignBits::pack(k.kernel(m).iter().copied()))
        .collect();
    let windows: Vec<SignBits> = (0..out_len)
        .map(|i| window_signs(x, k.kernel_size(), stride, i))
        .collect();
    let mut data = Vec::with_capacity(k.out_channels() * out_len);
    for (m, kbits) in kernels.iter().enumerate() {
        for window in &windows {
            data.push(k.bias()[m] + T::from_score(window.xnor_score(kbits)));
        }
    }
    Ok(Tensor1D::from_parts_unchecked(k.out_channels(), out_len, data))
}

/// Sign bits of the receptive field of output position `i`, channel-major like
/// [`KernelSet::kernel`].
pub(crate) fn window_signs<T: Scalar>(x: &Tensor1D<T>, kernel_size: usize, stride: usize, i: usize) -> SignBits {
    SignBits::pack((0..x.channels()).flat_map(|n| x.channel(n)[stride * i..stride * i + kernel_size].iter().copied()))
}

pub fn leaky_relu<T: Scalar>(x: &Tensor1D<T>) -> Tensor1D<T> {
    x.map(Scalar::leaky_relu)
}

/// Window 2, stride 2; a trailing odd element is dropped.
pub fn maxpool1d<T: Scalar>(x: &Tensor1D<T>) -> Tensor1D<T> {
    let out_len = pool_out_len(x.length());
    let mut data = Vec::with_capacity(x.channels() * out_len);
    for c in 0..x.channels() {
        let row = x.channel(c);
        data.extend((0..out_len).map(|j| row[2 * j].max_of(row[2 * j + 1])));
    }
    Tensor1D::from_parts_unchecked(x.channels(), out_len, data)
}

/// Fully-connected decision layer, weights stored `[class][feature]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer<T> {
    in_features: usize,
    out_classes: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Scalar> FcLayer<T> {
    pub fn new(in_features: usize, out_classes: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if in_features == 0 || out_classes < 2 {
            return Err(Error::domain(format!(
                "fc layer needs >= 1 feature and >= 2 classes, got {in_features} -> {out_classes}"
            )));
        }
        if weights.len() != in_features * out_classes || bias.len() != out_classes {
            return Err(Error::domain(format!(
                "fc layer {in_features} -> {out_classes} has {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite fc parameter"));
        }
        Ok(FcLayer {
            in_features,
            out_classes,
            weights,
            bias,
        })
    }

    pub fn zeros(in_features: usize, out_classes: usize) -> Self {
        FcLayer {
            in_features,
            out_classes,
            weights: vec![T::zero(); in_features * out_classes],
            bias: vec![T::zero(); out_classes],
        }
    }

    pub fn cast<U: Scalar>(&self) -> FcLayer<U> {
        FcLayer {
            in_features: self.in_features,
            out_classes: self.out_classes,
            weights: self.weights.iter().map(|v| U::from_f32(v.to_f32())).collect(),
            bias: self.bias.iter().map(|v| U::from_f32(v.to_f32())).collect(),
        }
    }

    /// Score of one class: bias, then features ascending.
    #[inline]
    pub fn class_score(&self, x: &[T], c: usize) -> T {
        self.row(c)
            .iter()
            .zip(x)
            .fold(self.bias[c], |acc, (&w, &v)| acc + w * v)
    }
}

impl<T> FcLayer<T> {
    pub fn in_features(&self) -> usize {
        self.in_features
    }

    pub fn out_classes(&self) -> usize {
        self.out_classes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.weights, &mut self.bias)
    }

    #[inline]
    pub fn row(&self, c: usize) -> &[T] {
        &self.weights[c * self.in_features..(c + 1) * self.in_features]
    }
}

/// `scores[c] = bias[c] + sum_j w[c][j] * x[j]`.
pub fn fc_forward<T: Scalar>(x: &[T], fc: &FcLayer<T>) -> Result<Vec<T>> {
    if x.len() != fc.in_features() {
        return Err(Error::domain(format!(
            "fc layer expects {} features, got {}",
            fc.in_features(),
            x.len()
        )));
    }
    Ok((0..fc.out_classes()).map(|c| fc.class_score(x, c)).collect())
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax<T: Scalar>(scores: &[T]) -> usize {
    let mut best = 0;
    for (c, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = c;
        }
    }
    best
}
