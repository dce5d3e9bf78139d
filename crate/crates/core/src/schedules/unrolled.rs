//! Unrolled design: kernel and channel loops unrolled as far as the budget
//! allows, feature-map loop pipelined once a whole output fits in one pass.

use std::collections::BTreeMap;

use super::activation_ops;
use super::exec::{activate, fc_scores, pool_pair, tally_binary};
use super::plan::{LayerCycles, LayerWork};
use super::trace::{CycleSource, ExecutionTrace, LoopLevel, OpCounts, Primitive, UnitWidths};
use crate::cost_model::{design_resources, ResourceProfile};
use crate::error::{Error, Result};
use crate::nn::{
    conv_out_len, pool_out_len, window_signs, Inference, LayerShape, Network, NetworkDims, SignBits, Tensor1D,
};
use crate::numerics::{Arithmetic, Scalar};

/// Loops widened by the chooser, innermost first.
const UNROLL_ORDER: [LoopLevel; 3] = [LoopLevel::Kernel, LoopLevel::InputChannel, LoopLevel::OutputChannel];

/// Greedy unroll widths: layer by layer, each loop in [`UNROLL_ORDER`] gets the
/// widest width that keeps the whole design within the DSP and LUT budget.
pub fn choose_unroll_widths(
    dims: &NetworkDims,
    arithmetic: Arithmetic,
    profile: &ResourceProfile,
) -> Result<Vec<UnitWidths>> {
    if profile.dsp_budget == Some(0) || profile.lut_budget == Some(0) {
        return Err(Error::config("resource budget of zero units"));
    }
    let works = LayerWork::from_dims(dims)?;
    let mut widths = vec![UnitWidths::SCALAR; works.len()];
    let fits = |widths: &[UnitWidths]| design_resources(&works, widths, arithmetic, profile).fits(profile);
    if !fits(&widths) {
        return Err(Error::config(format!(
            "resource budget (dsp {:?}, lut {:?}) cannot hold one unit per layer",
            profile.dsp_budget, profile.lut_budget
        )));
    }
    for li in 0..works.len() {
        for level in UNROLL_ORDER {
            for w in (1..=works[li].extent(level)).rev() {
                widths[li].set(level, w);
                if fits(&widths) {
                    break;
                }
            }
        }
    }
    Ok(widths)
}

fn pipelined(shape: &LayerShape, w: UnitWidths) -> bool {
    w.kernel >= shape.kernel_size && w.input_channel >= shape.in_channels
}

/// Cycles of one conv layer at widths `w`, by source, with the conv /
/// activation / pool split. The bool reports whether the layer is pipelined.
pub(super) fn conv_cycles(
    s: &LayerShape,
    w: UnitWidths,
    arithmetic: Arithmetic,
    p: &ResourceProfile,
) -> (BTreeMap<CycleSource, u64>, LayerCycles, bool) {
    let c = |prim: Primitive| p.cycles.cost(prim);
    let groups = s.out_channels.div_ceil(w.output_channel) as u64;
    let items = groups * s.conv_len.div_ceil(w.feature_map) as u64;
    let pool_items = groups * s.pooled_len.div_ceil(w.feature_map) as u64;
    let taps = s.taps() as u64;
    let is_pipelined = pipelined(s, w);
    // items per primitive for the non-pipelined loop; latency per item when pipelined
    let passes = (s.in_channels.div_ceil(w.input_channel) * s.kernel_size.div_ceil(w.kernel)) as u64;
    let (n_item, n_out, n_pool) = if is_pipelined {
        (1, 1, 1)
    } else {
        (items, items, pool_items)
    };

    let mut conv: Vec<(Primitive, u64)> = if s.binary {
        vec![
            (Primitive::Xnor, if is_pipelined { 1 } else { passes }),
            (Primitive::PopcountBit, taps),
            (Primitive::Shift, 1),
            (Primitive::Sub, 1),
            (Primitive::Add, 1),
        ]
    } else {
        vec![
            (Primitive::Mul, if is_pipelined { 1 } else { passes }),
            (Primitive::Add, taps),
        ]
    };
    for e in &mut conv {
        e.1 *= n_item * c(e.0);
    }
    let act: Vec<(Primitive, u64)> = activation_ops(arithmetic)
        .iter()
        .map(|&prim| (prim, n_out * c(prim)))
        .collect();
    let pool = (Primitive::Cmp, n_pool * c(Primitive::Cmp));

    let mut map = BTreeMap::new();
    for &(prim, cy) in conv.iter().chain(&act).chain([&pool]) {
        *map.entry(CycleSource::Op(prim)).or_insert(0) += cy;
    }
    let pipeline = if is_pipelined { items - 1 } else { 0 };
    map.insert(CycleSource::Pipeline, pipeline);
    map.retain(|_, v| *v > 0);
    let split = LayerCycles {
        conv: conv.iter().map(|e| e.1).sum(),
        activation: act.iter().map(|e| e.1).sum(),
        pool: pool.1,
        pipeline,
    };
    (map, split, is_pipelined)
}

/// FC cycles at widths `w` (`kernel` over features, `output_channel` over classes).
pub(super) fn fc_cycles(
    in_features: usize,
    classes: usize,
    w: UnitWidths,
    p: &ResourceProfile,
    map: &mut BTreeMap<CycleSource, u64>,
) -> bool {
    let groups = classes.div_ceil(w.output_channel) as u64;
    let j = in_features as u64;
    let (c_mul, c_add) = (p.cycles.cost(Primitive::Mul), p.cycles.cost(Primitive::Add));
    let is_pipelined = w.kernel >= in_features;
    if is_pipelined {
        map.insert(CycleSource::Op(Primitive::Mul), c_mul);
        map.insert(CycleSource::Op(Primitive::Add), j * c_add);
        map.insert(CycleSource::Pipeline, groups - 1);
    } else {
        let passes = in_features.div_ceil(w.kernel) as u64;
        map.insert(CycleSource::Op(Primitive::Mul), groups * passes * c_mul);
        map.insert(CycleSource::Op(Primitive::Add), groups * j * c_add);
    }
    is_pipelined
}

/// Evaluates `net` tile by tile: for each block of output channels and
/// positions the products of one unrolled pass are formed first, then reduced
/// into the accumulator in canonical order.
pub(super) fn execute<T: Scalar>(
    net: &Network<T>,
    x: &Tensor1D<T>,
    trace: &ExecutionTrace,
    tally: &mut OpCounts,
) -> Inference<T> {
    let mut h = x.clone();
    let mut products: Vec<T> = Vec::new();
    for (li, layer) in net.conv_layers().iter().enumerate() {
        let w = trace.layers[li].widths;
        let k = &layer.kernels;
        let (n_out, n_in, f) = (k.out_channels(), k.in_channels(), k.kernel_size());
        let stride = layer.stride;
        let len = conv_out_len(h.length(), f, stride);
        let mut act = vec![T::zero(); n_out * len];
        let kernel_bits: Vec<SignBits> = if layer.binary {
            (0..n_out)
                .map(|m| SignBits::pack(k.kernel(m).iter().copied()))
                .collect()
        } else {
            Vec::new()
        };
        for m0 in (0..n_out).step_by(w.output_channel) {
            for i0 in (0..len).step_by(w.feature_map) {
                for m in m0..(m0 + w.output_channel).min(n_out) {
                    for i in i0..(i0 + w.feature_map).min(len) {
                        let z = if layer.binary {
                            tally_binary(tally, n_in * f);
                            let window = window_signs(&h, f, stride, i);
                            k.bias()[m] + T::from_score(window.xnor_score(&kernel_bits[m]))
                        } else {
                            // each pass fills its lanes' product slots; the
                            // accumulation then runs over the slots in canonical order
                            products.clear();
                            products.resize(n_in * f, T::zero());
                            for n0 in (0..n_in).step_by(w.input_channel) {
                                for f0 in (0..f).step_by(w.kernel) {
                                    for n in n0..(n0 + w.input_channel).min(n_in) {
                                        let xs = &h.channel(n)[stride * i..stride * i + f];
                                        let ks = k.taps(m, n);
                                        for t in f0..(f0 + w.kernel).min(f) {
                                            products[n * f + t] = xs[t] * ks[t];
                                        }
                                    }
                                }
                            }
                            tally.add(Primitive::Mul, products.len() as u64);
                            tally.add(Primitive::Add, products.len() as u64);
                            products.iter().fold(k.bias()[m], |acc, &p| acc + p)
                        };
                        act[m * len + i] = activate(z, tally);
                    }
                }
            }
        }
        let plen = pool_out_len(len);
        let mut pooled = Vec::with_capacity(n_out * plen);
        for m in 0..n_out {
            let row = &act[m * len..(m + 1) * len];
            for j in 0..plen {
                pooled.push(pool_pair(row[2 * j], row[2 * j + 1], tally));
            }
        }
        h = Tensor1D::from_parts_unchecked(n_out, plen, pooled);
    }
    let classes = net.fc().out_classes();
    fc_scores(h.as_slice(), net.fc(), 0..classes, tally)
}
