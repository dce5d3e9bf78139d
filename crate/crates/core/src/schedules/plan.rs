//! Shape-only accounting: operation counts and modeled cycles per schedule.

use std::collections::BTreeMap;

use super::trace::{CycleSource, ExecutionTrace, LayerId, LayerTrace, LoopLevel, OpCounts, Primitive, UnitWidths};
use super::{activation_ops, unrolled, ScheduleKind};
use crate::cost_model::ResourceProfile;
use crate::error::Result;
use crate::nn::{LayerShape, NetworkDims};
use crate::numerics::Arithmetic;

/// One layer of the loop nest as the hardware sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerWork {
    Conv(LayerShape),
    Fc { in_features: usize, classes: usize },
}

impl LayerWork {
    pub fn from_dims(dims: &NetworkDims) -> Result<Vec<LayerWork>> {
        let mut out: Vec<LayerWork> = dims.layer_shapes()?.into_iter().map(LayerWork::Conv).collect();
        out.push(LayerWork::Fc {
            in_features: dims.fc_in_features()?,
            classes: dims.classes,
        });
        Ok(out)
    }

    pub fn id(&self) -> LayerId {
        match self {
            LayerWork::Conv(s) => LayerId::Conv(s.index),
            LayerWork::Fc { .. } => LayerId::Fc,
        }
    }

    /// Trip count of a loop level.
    pub fn extent(&self, level: LoopLevel) -> usize {
        match (self, level) {
            (LayerWork::Conv(s), LoopLevel::OutputChannel) => s.out_channels,
            (LayerWork::Conv(s), LoopLevel::InputChannel) => s.in_channels,
            (LayerWork::Conv(s), LoopLevel::FeatureMap) => s.conv_len,
            (LayerWork::Conv(s), LoopLevel::Kernel) => s.kernel_size,
            (LayerWork::Fc { classes, .. }, LoopLevel::OutputChannel) => *classes,
            (LayerWork::Fc { .. }, LoopLevel::InputChannel | LoopLevel::FeatureMap) => 1,
            (LayerWork::Fc { in_features, .. }, LoopLevel::Kernel) => *in_features,
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, LayerWork::Conv(s) if s.binary)
    }
}

/// Operations behind one convolution output (before activation).
pub(crate) fn conv_output_ops(shape: &LayerShape) -> OpCounts {
    let taps = shape.taps() as u64;
    let mut ops = OpCounts::default();
    if shape.binary {
        ops.add(Primitive::Xnor, taps);
        ops.add(Primitive::PopcountBit, taps);
        // 2 * popcount - window, then + bias
        ops.add(Primitive::Shift, 1);
        ops.add(Primitive::Sub, 1);
        ops.add(Primitive::Add, 1);
    } else {
        ops.add(Primitive::Mul, taps);
        ops.add(Primitive::Add, taps);
    }
    ops
}

fn scaled(ops: &OpCounts, n: u64) -> OpCounts {
    let mut out = OpCounts::default();
    for (p, c) in ops.iter() {
        out.add(p, c * n);
    }
    out
}

fn activation(arithmetic: Arithmetic) -> OpCounts {
    let mut ops = OpCounts::default();
    for &p in activation_ops(arithmetic) {
        ops.add(p, 1);
    }
    ops
}

fn pool() -> OpCounts {
    let mut ops = OpCounts::default();
    ops.add(Primitive::Cmp, 1);
    ops
}

fn fc_ops(in_features: usize, classes: usize) -> OpCounts {
    let mut ops = OpCounts::default();
    ops.add(Primitive::Mul, (in_features * classes) as u64);
    ops.add(Primitive::Add, (in_features * classes) as u64);
    ops
}

/// Arithmetic work of one inference. Identical for every schedule.
pub fn op_counts(dims: &NetworkDims, arithmetic: Arithmetic) -> Result<OpCounts> {
    let mut total = OpCounts::default();
    for work in LayerWork::from_dims(dims)? {
        match work {
            LayerWork::Conv(s) => {
                let outputs = (s.out_channels * s.conv_len) as u64;
                total.merge(&scaled(&conv_output_ops(&s), outputs));
                total.merge(&scaled(&activation(arithmetic), outputs));
                total.merge(&scaled(&pool(), (s.out_channels * s.pooled_len) as u64));
            }
            LayerWork::Fc { in_features, classes } => total.merge(&fc_ops(in_features, classes)),
        }
    }
    Ok(total)
}

fn charge(cycles: &mut BTreeMap<CycleSource, u64>, ops: &OpCounts, profile: &ResourceProfile) {
    for (p, c) in ops.iter() {
        if c > 0 {
            *cycles.entry(CycleSource::Op(p)).or_insert(0) += c * profile.cycles.cost(p);
        }
    }
}

/// Cycle split of one convolutional layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerCycles {
    /// Multiply-accumulate (or XNOR/popcount) part of the feature-map loop.
    pub conv: u64,
    pub activation: u64,
    pub pool: u64,
    pub pipeline: u64,
}

impl LayerCycles {
    pub fn total(&self) -> u64 {
        self.conv + self.activation + self.pool + self.pipeline
    }
}

/// Cycles of one conv layer under `kind` with explicit unit widths (ignored for
/// `Sequential`/`InnerParallel`, whose widths are fixed).
pub fn conv_layer_cycles(
    kind: ScheduleKind,
    shape: &LayerShape,
    widths: UnitWidths,
    arithmetic: Arithmetic,
    profile: &ResourceProfile,
) -> LayerCycles {
    let cost = |ops: &OpCounts| ops.iter().map(|(p, c)| c * profile.cycles.cost(p)).sum::<u64>();
    let per_output = cost(&conv_output_ops(shape));
    let act = cost(&activation(arithmetic));
    let cmp = profile.cycles.cost(Primitive::Cmp);
    let n = shape.out_channels as u64;
    match kind {
        ScheduleKind::Sequential => LayerCycles {
            conv: n * shape.conv_len as u64 * per_output,
            activation: n * shape.conv_len as u64 * act,
            pool: n * shape.pooled_len as u64 * cmp,
            pipeline: 0,
        },
        ScheduleKind::InnerParallel => {
            let steps = shape.conv_len.div_ceil(2) as u64;
            let pool_steps = shape.pooled_len.div_ceil(2) as u64;
            LayerCycles {
                conv: n * steps * per_output,
                activation: n * steps * act,
                pool: n * pool_steps * cmp,
                pipeline: 0,
            }
        }
        ScheduleKind::FullyUnrolled => unrolled::conv_cycles(shape, widths, arithmetic, profile).1,
    }
}

/// Modeled trace of one inference under `kind`, without evaluating anything.
pub fn plan(
    dims: &NetworkDims,
    arithmetic: Arithmetic,
    kind: ScheduleKind,
    profile: &ResourceProfile,
) -> Result<ExecutionTrace> {
    profile.validate()?;
    let works = LayerWork::from_dims(dims)?;
    let widths: Vec<UnitWidths> = match kind {
        ScheduleKind::Sequential => vec![UnitWidths::SCALAR; works.len()],
        ScheduleKind::InnerParallel => vec![
            UnitWidths {
                feature_map: 2,
                ..UnitWidths::SCALAR
            };
            works.len()
        ],
        ScheduleKind::FullyUnrolled => unrolled::choose_unroll_widths(dims, arithmetic, profile)?,
    };

    let mut layers = Vec::with_capacity(works.len());
    for (work, w) in works.iter().zip(widths) {
        let mut cycles = BTreeMap::new();
        let mut pipelined = false;
        match (kind, work) {
            (ScheduleKind::Sequential, LayerWork::Conv(s)) => {
                let outputs = (s.out_channels * s.conv_len) as u64;
                charge(&mut cycles, &scaled(&conv_output_ops(s), outputs), profile);
                charge(&mut cycles, &scaled(&activation(arithmetic), outputs), profile);
                charge(
                    &mut cycles,
                    &scaled(&pool(), (s.out_channels * s.pooled_len) as u64),
                    profile,
                );
            }
            (ScheduleKind::Sequential, LayerWork::Fc { in_features, classes }) => {
                charge(&mut cycles, &fc_ops(*in_features, *classes), profile);
            }
            (ScheduleKind::InnerParallel, LayerWork::Conv(s)) => {
                // both ends of the feature map advance in the same step
                let steps = (s.out_channels * s.conv_len.div_ceil(2)) as u64;
                let pool_steps = (s.out_channels * s.pooled_len.div_ceil(2)) as u64;
                charge(&mut cycles, &scaled(&conv_output_ops(s), steps), profile);
                charge(&mut cycles, &scaled(&activation(arithmetic), steps), profile);
                charge(&mut cycles, &scaled(&pool(), pool_steps), profile);
            }
            (ScheduleKind::InnerParallel, LayerWork::Fc { in_features, classes }) => {
                // the two datapaths take alternate classes
                charge(&mut cycles, &fc_ops(*in_features, classes.div_ceil(2)), profile);
            }
            (ScheduleKind::FullyUnrolled, LayerWork::Conv(s)) => {
                let (map, _, p) = unrolled::conv_cycles(s, w, arithmetic, profile);
                cycles = map;
                pipelined = p;
            }
            (ScheduleKind::FullyUnrolled, LayerWork::Fc { in_features, classes }) => {
                pipelined = unrolled::fc_cycles(*in_features, *classes, w, profile, &mut cycles);
            }
        }
        cycles.retain(|_, c| *c > 0);
        layers.push(LayerTrace {
            layer: work.id(),
            widths: w,
            pipelined,
            cycles,
        });
    }

    Ok(ExecutionTrace {
        schedule: kind,
        op_counts: op_counts(dims, arithmetic)?,
        control_cycles: profile.control_cycles,
        layers,
    })
}
