use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::ops::{Index, IndexMut};

use super::ScheduleKind;
use crate::error::{Error, Result};

/// Hardware primitive an operation maps onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Mul,
    Add,
    Sub,
    Cmp,
    Xnor,
    PopcountBit,
    Shift,
}

impl Primitive {
    pub const ALL: [Primitive; 7] = [
        Primitive::Mul,
        Primitive::Add,
        Primitive::Sub,
        Primitive::Cmp,
        Primitive::Xnor,
        Primitive::PopcountBit,
        Primitive::Shift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Mul => "fMUL",
            Primitive::Add => "fADD",
            Primitive::Sub => "fSUB",
            Primitive::Cmp => "fCMP",
            Primitive::Xnor => "XNOR",
            Primitive::PopcountBit => "POPCOUNT",
            Primitive::Shift => "SHIFT",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Primitive::ALL.into_iter().find(|p| p.name() == s)
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Count per primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts([u64; 7]);

impl OpCounts {
    #[inline]
    pub fn add(&mut self, p: Primitive, n: u64) {
        self.0[p as usize] += n;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Primitive, u64)> + '_ {
        Primitive::ALL.into_iter().map(move |p| (p, self.0[p as usize]))
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn merge(&mut self, other: &OpCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

impl Index<Primitive> for OpCounts {
    type Output = u64;

    fn index(&self, p: Primitive) -> &u64 {
        &self.0[p as usize]
    }
}

impl IndexMut<Primitive> for OpCounts {
    fn index_mut(&mut self, p: Primitive) -> &mut u64 {
        &mut self.0[p as usize]
    }
}

/// What a block of cycles is spent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CycleSource {
    Op(Primitive),
    /// Issue slots of a pipelined loop after the fill (one per initiation interval).
    Pipeline,
    /// Per-inference control/handshake overhead.
    Control,
}

/// Loop levels of the convolution nest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LoopLevel {
    OutputChannel,
    InputChannel,
    FeatureMap,
    Kernel,
}

impl LoopLevel {
    pub const ALL: [LoopLevel; 4] = [
        LoopLevel::OutputChannel,
        LoopLevel::InputChannel,
        LoopLevel::FeatureMap,
        LoopLevel::Kernel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LoopLevel::OutputChannel => "output_channel",
            LoopLevel::InputChannel => "input_channel",
            LoopLevel::FeatureMap => "feature_map",
            LoopLevel::Kernel => "kernel",
        }
    }
}

/// Number of parallel compute units along each loop of one layer. For the FC
/// layer `Kernel` is the feature loop and `OutputChannel` the class loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UnitWidths {
    pub output_channel: usize,
    pub input_channel: usize,
    pub feature_map: usize,
    pub kernel: usize,
}

impl UnitWidths {
    pub const SCALAR: UnitWidths = UnitWidths {
        output_channel: 1,
        input_channel: 1,
        feature_map: 1,
        kernel: 1,
    };

    pub fn get(&self, level: LoopLevel) -> usize {
        match level {
            LoopLevel::OutputChannel => self.output_channel,
            LoopLevel::InputChannel => self.input_channel,
            LoopLevel::FeatureMap => self.feature_map,
            LoopLevel::Kernel => self.kernel,
        }
    }

    pub(crate) fn set(&mut self, level: LoopLevel, w: usize) {
        match level {
            LoopLevel::OutputChannel => self.output_channel = w,
            LoopLevel::InputChannel => self.input_channel = w,
            LoopLevel::FeatureMap => self.feature_map = w,
            LoopLevel::Kernel => self.kernel = w,
        }
    }

    /// Multiply-accumulate (or XNOR/popcount) lanes instantiated.
    pub fn lanes(&self) -> usize {
        self.output_channel * self.input_channel * self.feature_map * self.kernel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerId {
    Conv(usize),
    Fc,
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerId::Conv(i) => write!(f, "conv{i}"),
            LayerId::Fc => f.write_str("fc"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerTrace {
    pub layer: LayerId,
    pub widths: UnitWidths,
    /// Whether the feature-map loop of this layer is pipelined.
    pub pipelined: bool,
    pub cycles: BTreeMap<CycleSource, u64>,
}

impl LayerTrace {
    pub fn total_cycles(&self) -> u64 {
        self.cycles.values().sum()
    }
}

/// Which schedule ran, the arithmetic work it did and how long it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub schedule: ScheduleKind,
    pub op_counts: OpCounts,
    pub control_cycles: u64,
    pub layers: Vec<LayerTrace>,
}

impl ExecutionTrace {
    pub fn cycles(&self) -> u64 {
        self.control_cycles + self.layers.iter().map(LayerTrace::total_cycles).sum::<u64>()
    }

    /// Cycles attributed to each source, summed over layers.
    pub fn cycle_breakdown(&self) -> BTreeMap<CycleSource, u64> {
        let mut out = BTreeMap::new();
        for layer in &self.layers {
            for (&src, &c) in &layer.cycles {
                *out.entry(src).or_insert(0) += c;
            }
        }
        *out.entry(CycleSource::Control).or_insert(0) += self.control_cycles;
        out
    }

    /// Widest unit count per loop level over all layers.
    pub fn parallel_units(&self) -> BTreeMap<LoopLevel, usize> {
        LoopLevel::ALL
            .into_iter()
            .map(|l| (l, self.layers.iter().map(|t| t.widths.get(l)).max().unwrap_or(1)))
            .collect()
    }

    /// Structured text record, one item per line:
    ///
    /// ```text
    /// schedule Sequential
    /// cycles 18144
    /// op fMUL 8624 8624
    /// ...
    /// pipeline - 0
    /// control - 1824
    /// layer conv0 pipelined=0 output_channel=1 input_channel=1 feature_map=1 kernel=1 cycles=2800
    /// ```
    ///
    /// `op` lines carry the primitive name, its count and the cycles attributed to it.
    pub fn to_text(&self) -> String {
        let breakdown = self.cycle_breakdown();
        let get = |s: CycleSource| breakdown.get(&s).copied().unwrap_or(0);
        let mut out = String::new();
        writeln!(out, "schedule {}", self.schedule).unwrap();
        writeln!(out, "cycles {}", self.cycles()).unwrap();
        for (p, count) in self.op_counts.iter() {
            writeln!(out, "op {} {} {}", p.name(), count, get(CycleSource::Op(p))).unwrap();
        }
        writeln!(out, "pipeline - {}", get(CycleSource::Pipeline)).unwrap();
        writeln!(out, "control - {}", self.control_cycles).unwrap();
        for l in &self.layers {
            write!(out, "layer {} pipelined={}", l.layer, l.pipelined as u8).unwrap();
            for level in LoopLevel::ALL {
                write!(out, " {}={}", level.name(), l.widths.get(level)).unwrap();
            }
            writeln!(out, " cycles={}", l.total_cycles()).unwrap();
        }
        out
    }

    /// Summary parsed back from [`ExecutionTrace::to_text`].
    pub fn parse_text(text: &str) -> Result<TraceSummary> {
        let bad = |line: &str| Error::format(format!("malformed trace line {line:?}"));
        let mut summary = TraceSummary::default();
        let mut schedule = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["schedule", name] => schedule = Some(name.parse()?),
                ["cycles", c] => summary.cycles = c.parse().map_err(|_| bad(line))?,
                ["op", name, count, cycles] => {
                    let p = Primitive::from_name(name).ok_or_else(|| bad(line))?;
                    summary.op_counts[p] = count.parse().map_err(|_| bad(line))?;
                    summary.op_cycles.insert(p, cycles.parse().map_err(|_| bad(line))?);
                }
                ["pipeline", "-", c] => summary.pipeline_cycles = c.parse().map_err(|_| bad(line))?,
                ["control", "-", c] => summary.control_cycles = c.parse().map_err(|_| bad(line))?,
                ["layer", ..] => summary.layers += 1,
                _ => return Err(bad(line)),
            }
        }
        summary.schedule = schedule.ok_or_else(|| Error::format("trace has no schedule line"))?;
        Ok(summary)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceSummary {
    pub schedule: ScheduleKind,
    pub cycles: u64,
    pub op_counts: OpCounts,
    pub op_cycles: BTreeMap<Primitive, u64>,
    pub pipeline_cycles: u64,
    pub control_cycles: u64,
    pub layers: usize,
}

impl Default for TraceSummary {
    fn default() -> Self {
        TraceSummary {
            schedule: ScheduleKind::Sequential,
            cycles: 0,
            op_counts: OpCounts::default(),
            op_cycles: BTreeMap::new(),
            pipeline_cycles: 0,
            control_cycles: 0,
            layers: 0,
        }
    }
}
