//! Finite-difference check of the analytic gradient.

use super::model::{backward, forward, loss, param_blocks, param_blocks_mut, ParamBlocks};
use crate::error::{Error, Result};
use crate::nn::{LayerShape, Network, Tensor1D};

/// Denominator floor of the relative error, so parameters with near-zero
/// gradients are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|g_a - g_n| / max(|g_a| + |g_n|, floor)` over checked parameters.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Flat indices of parameters skipped because a perturbation crossed a
    /// Leaky-ReLU or max-pool kink.
    pub excluded: Vec<usize>,
}

/// Sign pattern of every pre-activation plus every pool winner.
fn kink_pattern(net: &Network<f64>, shapes: &[LayerShape], x: &[f64]) -> (Vec<bool>, Vec<usize>) {
    let cache = forward(net, shapes, x);
    let signs = cache
        .layers
        .iter()
        .flat_map(|l| l.z.iter().map(|&z| z >= 0.0))
        .collect();
    let picks = cache.layers.iter().flat_map(|l| l.pick.iter().copied()).collect();
    (signs, picks)
}

/// Compares backpropagated gradients of the loss at `(x, label)` with central
/// differences of step `h`, one parameter at a time.
///
/// Only real-valued networks qualify: a binary layer's sign is piecewise
/// constant, so its straight-through gradient has no finite-difference match.
pub fn gradient_check(net: &Network<f64>, x: &Tensor1D<f64>, label: usize, h: f64) -> Result<GradCheckReport> {
    net.check_input(x)?;
    if net.conv_layers().iter().any(|l| l.binary) {
        return Err(Error::domain("gradient check requires a network without binary layers"));
    }
    if label >= net.fc().out_classes() {
        return Err(Error::domain(format!("label {label} out of range")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::domain(format!("invalid step {h}")));
    }
    let shapes = net.layer_shapes();
    let x = x.as_slice();
    let mut grads = ParamBlocks::zeros_like(net);
    backward(net, &shapes, &forward(net, &shapes, x), label, &mut grads);
    let analytic: Vec<f64> = grads.flat().collect();
    let base = kink_pattern(net, &shapes, x);

    let sizes: Vec<usize> = param_blocks(net).iter().map(|b| b.len()).collect();
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        excluded: Vec::new(),
    };
    let mut flat = 0;
    for (bi, &size) in sizes.iter().enumerate() {
        for k in 0..size {
            let orig = param_blocks(&probe)[bi][k];
            let mut at = |v: f64| {
                param_blocks_mut(&mut probe)[bi][k] = v;
                (loss(&probe, &shapes, x, label), kink_pattern(&probe, &shapes, x))
            };
            let (lp, kp) = at(orig + h);
            let (lm, km) = at(orig - h);
            at(orig);
            if kp != base || km != base {
                report.excluded.push(flat);
            } else {
                let numeric = (lp - lm) / (2.0 * h);
                let a = analytic[flat];
                let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(REL_ERROR_FLOOR);
                report.max_rel_error = report.max_rel_error.max(rel);
                report.checked += 1;
            }
            flat += 1;
        }
    }
    Ok(report)
}
