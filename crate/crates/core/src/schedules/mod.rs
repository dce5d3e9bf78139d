//! The three hardware schedules: sequential (architecture 1), fully unrolled and
//! pipelined (architecture 2) and the dual-ended inner-parallel schedule
//! (architecture 3).
//!
//! Every schedule evaluates each output with the same ordered sequence of
//! additions and multiplications, so outputs are bit-identical; they differ
//! only in the [`ExecutionTrace`] they produce.

mod exec;
mod inner_parallel;
mod plan;
mod sequential;
mod trace;
mod unrolled;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost_model::ResourceProfile;
use crate::error::{Error, Result};
use crate::nn::{Inference, Network, Tensor1D};
use crate::numerics::{Arithmetic, Scalar};

pub use plan::{conv_layer_cycles, op_counts, plan, LayerCycles, LayerWork};
pub use trace::{
    CycleSource, ExecutionTrace, LayerId, LayerTrace, LoopLevel, OpCounts, Primitive, TraceSummary, UnitWidths,
};
pub use unrolled::choose_unroll_widths;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// One compute unit per operation, layers and loops strictly sequential.
    Sequential,
    /// Loop nest walked from both ends of the feature map with a duplicated datapath.
    InnerParallel,
    /// Kernel/channel loops unrolled as far as the resource budget allows,
    /// feature-map loop pipelined with initiation interval 1.
    FullyUnrolled,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 3] = [
        ScheduleKind::Sequential,
        ScheduleKind::InnerParallel,
        ScheduleKind::FullyUnrolled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Sequential => "Sequential",
            ScheduleKind::InnerParallel => "InnerParallel",
            ScheduleKind::FullyUnrolled => "FullyUnrolled",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "sequential" | "seq" => Ok(ScheduleKind::Sequential),
            "innerparallel" | "inner" => Ok(ScheduleKind::InnerParallel),
            "fullyunrolled" | "unrolled" => Ok(ScheduleKind::FullyUnrolled),
            _ => Err(Error::config(format!("unknown schedule {s:?}"))),
        }
    }
}

/// Baseline design (CNN1/BCNN1).
pub fn run_sequential<T: Scalar>(
    net: &Network<T>,
    x: &Tensor1D<T>,
    profile: &ResourceProfile,
) -> Result<(Inference<T>, ExecutionTrace)> {
    run(ScheduleKind::Sequential, net, x, profile)
}

/// Inner-parallel design (CNN3/BCNN3).
pub fn run_inner_parallel<T: Scalar>(
    net: &Network<T>,
    x: &Tensor1D<T>,
    profile: &ResourceProfile,
) -> Result<(Inference<T>, ExecutionTrace)> {
    run(ScheduleKind::InnerParallel, net, x, profile)
}

/// Unrolled, pipelined design (CNN2/BCNN2).
pub fn run_fully_unrolled<T: Scalar>(
    net: &Network<T>,
    x: &Tensor1D<T>,
    profile: &ResourceProfile,
) -> Result<(Inference<T>, ExecutionTrace)> {
    run(ScheduleKind::FullyUnrolled, net, x, profile)
}

/// Executes `net` on `x` under `kind`. The trace's op counts are tallied by the
/// executing loop nest itself.
pub fn run<T: Scalar>(
    kind: ScheduleKind,
    net: &Network<T>,
    x: &Tensor1D<T>,
    profile: &ResourceProfile,
) -> Result<(Inference<T>, ExecutionTrace)> {
    net.check_input(x)?;
    let mut trace = plan(&net.dims(), T::arithmetic(), kind, profile)?;
    let mut tally = OpCounts::default();
    let out = match kind {
        ScheduleKind::Sequential => sequential::execute(net, x, &mut tally),
        ScheduleKind::InnerParallel => inner_parallel::execute(net, x, &mut tally),
        ScheduleKind::FullyUnrolled => unrolled::execute(net, x, &trace, &mut tally),
    };
    trace.op_counts = tally;
    Ok((out, trace))
}

/// Trace for a network's shape without evaluating anything.
pub fn trace_for<T: Scalar>(net: &Network<T>, kind: ScheduleKind, profile: &ResourceProfile) -> Result<ExecutionTrace> {
    plan(&net.dims(), T::arithmetic(), kind, profile)
}

pub(crate) fn activation_ops(arithmetic: Arithmetic) -> &'static [Primitive] {
    match arithmetic {
        Arithmetic::Fixed(_) => &[Primitive::Shift],
        Arithmetic::Real32 | Arithmetic::Real64 => &[Primitive::Cmp, Primitive::Mul],
    }
}
