//! Forward pass with caches and manual backpropagation over a [`Network`].

use num_traits::Float;

use crate::nn::{LayerShape, Network};
use crate::numerics::Scalar;

/// Real scalar the trainer differentiates in.
pub trait TrainScalar: Scalar + Float {}

impl<F: Scalar + Float> TrainScalar for F {}

/// Parameter-shaped buffers in weights-file order: per conv layer weights then
/// biases, then FC weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlocks<F>(pub Vec<Vec<F>>);

impl<F: TrainScalar> ParamBlocks<F> {
    pub fn zeros_like(net: &Network<F>) -> Self {
        ParamBlocks(param_blocks(net).iter().map(|b| vec![F::zero(); b.len()]).collect())
    }

    pub fn fill_zero(&mut self) {
        for b in &mut self.0 {
            b.fill(F::zero());
        }
    }

    pub fn add_assign(&mut self, other: &ParamBlocks<F>) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
    }

    pub fn scale(&mut self, k: F) {
        for b in &mut self.0 {
            for x in b {
                *x = *x * k;
            }
        }
    }

    pub fn flat(&self) -> impl Iterator<Item = F> + '_ {
        self.0.iter().flatten().copied()
    }
}

pub fn param_blocks<F>(net: &Network<F>) -> Vec<&[F]> {
    let mut out: Vec<&[F]> = Vec::new();
    for l in net.conv_layers() {
        out.push(l.kernels.weights());
        out.push(l.kernels.bias());
    }
    out.push(net.fc().weights());
    out.push(net.fc().bias());
    out
}

pub fn param_blocks_mut<F>(net: &mut Network<F>) -> Vec<&mut [F]> {
    let mut out: Vec<&mut [F]> = Vec::new();
    let (conv, fc) = net.params_mut();
    for l in conv {
        let (w, b) = l.kernels.params_mut();
        out.push(w);
        out.push(b);
    }
    let (w, b) = fc.params_mut();
    out.push(w);
    out.push(b);
    out
}

pub(crate) struct LayerCache<F> {
    pub input: Vec<F>,
    pub z: Vec<F>,
    /// Index into the activated map of each pooled output's winner.
    pub pick: Vec<usize>,
}

pub(crate) struct Cache<F> {
    pub layers: Vec<LayerCache<F>>,
    pub features: Vec<F>,
    pub scores: Vec<F>,
}

fn msb_f<F: TrainScalar>(v: F) -> F {
    if Scalar::msb(v) < 0 {
        -F::one()
    } else {
        F::one()
    }
}

/// Same arithmetic as inference: per output, bias first, channels and taps ascending.
pub(crate) fn forward<F: TrainScalar>(net: &Network<F>, shapes: &[LayerShape], x: &[F]) -> Cache<F> {
    let mut h = x.to_vec();
    let mut layers = Vec::with_capacity(shapes.len());
    for (layer, s) in net.conv_layers().iter().zip(shapes) {
        let k = &layer.kernels;
        let mut z = Vec::with_capacity(s.out_channels * s.conv_len);
        for m in 0..s.out_channels {
            for i in 0..s.conv_len {
                if s.binary {
                    let mut score = 0i32;
                    for n in 0..s.in_channels {
                        let row = &h[n * s.in_len + s.stride * i..];
                        for (f, &w) in k.taps(m, n).iter().enumerate() {
                            score += Scalar::msb(row[f]) * Scalar::msb(w);
                        }
                    }
                    z.push(k.bias()[m] + F::from_score(score));
                } else {
                    let mut acc = k.bias()[m];
                    for n in 0..s.in_channels {
                        let row = &h[n * s.in_len + s.stride * i..];
                        for (f, &w) in k.taps(m, n).iter().enumerate() {
                            acc = acc + row[f] * w;
                        }
                    }
                    z.push(acc);
                }
            }
        }
        let mut pooled = Vec::with_capacity(s.out_channels * s.pooled_len);
        let mut pick = Vec::with_capacity(s.out_channels * s.pooled_len);
        for m in 0..s.out_channels {
            for j in 0..s.pooled_len {
                let a = m * s.conv_len + 2 * j;
                let (lo, hi) = (z[a].leaky_relu(), z[a + 1].leaky_relu());
                if hi > lo {
                    pooled.push(hi);
                    pick.push(a + 1);
                } else {
                    pooled.push(lo);
                    pick.push(a);
                }
            }
        }
        layers.push(LayerCache { input: h, z, pick });
        h = pooled;
    }
    let fc = net.fc();
    let scores = (0..fc.out_classes()).map(|c| fc.class_score(&h, c)).collect();
    Cache {
        layers,
        features: h,
        scores,
    }
}

/// Softmax cross-entropy and its gradient with respect to the scores.
pub(crate) fn cross_entropy<F: TrainScalar>(scores: &[F], label: usize) -> (F, Vec<F>) {
    let max = scores.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum = exps.iter().copied().fold(F::zero(), |a, b| a + b);
    let loss = sum.ln() + max - scores[label];
    let mut grad: Vec<F> = exps.iter().map(|&e| e / sum).collect();
    grad[label] = grad[label] - F::one();
    (loss, grad)
}

/// Accumulates the loss gradient of one sample into `grads`; returns the loss.
///
/// Binary layers use the straight-through estimator: the sign's gradient is
/// passed unchanged where the shadow weight (or input) lies in `[-1, 1]` and
/// blocked elsewhere.
pub(crate) fn backward<F: TrainScalar>(
    net: &Network<F>,
    shapes: &[LayerShape],
    cache: &Cache<F>,
    label: usize,
    grads: &mut ParamBlocks<F>,
) -> F {
    let (loss, dscores) = cross_entropy(&cache.scores, label);
    let fc = net.fc();
    let nl = shapes.len();
    let j = fc.in_features();
    let mut dh = vec![F::zero(); j];
    {
        let (gw, rest) = grads.0[2 * nl..].split_at_mut(1);
        let (gw, gb) = (&mut gw[0], &mut rest[0]);
        for (c, &ds) in dscores.iter().enumerate() {
            gb[c] = gb[c] + ds;
            let row = fc.row(c);
            for f in 0..j {
                gw[c * j + f] = gw[c * j + f] + ds * cache.features[f];
                dh[f] = dh[f] + ds * row[f];
            }
        }
    }
    let one = F::one();
    let slope = F::from_f32(crate::numerics::LEAKY_SLOPE);
    for li in (0..nl).rev() {
        let s = &shapes[li];
        let lc = &cache.layers[li];
        let k = &net.conv_layers()[li].kernels;
        // through the pool and the activation
        let mut dz = vec![F::zero(); s.out_channels * s.conv_len];
        for (p, &idx) in lc.pick.iter().enumerate() {
            let d = if lc.z[idx] >= F::zero() { dh[p] } else { dh[p] * slope };
            dz[idx] = dz[idx] + d;
        }
        let mut dx = vec![F::zero(); s.in_channels * s.in_len];
        let (gw, rest) = grads.0[2 * li..].split_at_mut(1);
        let (gw, gb) = (&mut gw[0], &mut rest[0]);
        for m in 0..s.out_channels {
            for i in 0..s.conv_len {
                let d = dz[m * s.conv_len + i];
                if d == F::zero() {
                    continue;
                }
                gb[m] = gb[m] + d;
                for n in 0..s.in_channels {
                    let base = n * s.in_len + s.stride * i;
                    let taps = k.taps(m, n);
                    for f in 0..s.kernel_size {
                        let wi = (m * s.in_channels + n) * s.kernel_size + f;
                        let xv = lc.input[base + f];
                        if s.binary {
                            if taps[f].abs() <= one {
                                gw[wi] = gw[wi] + d * msb_f(xv);
                            }
                            if xv.abs() <= one {
                                dx[base + f] = dx[base + f] + d * msb_f(taps[f]);
                            }
                        } else {
                            gw[wi] = gw[wi] + d * xv;
                            dx[base + f] = dx[base + f] + d * taps[f];
                        }
                    }
                }
            }
        }
        dh = dx;
    }
    loss
}

/// Loss of one sample, without gradients.
pub(crate) fn loss<F: TrainScalar>(net: &Network<F>, shapes: &[LayerShape], x: &[F], label: usize) -> F {
    cross_entropy(&forward(net, shapes, x).scores, label).0
}
