//! FPGA resource and latency estimates for a network under a schedule, and the
//! efficiency index relating a latency gain to the power it costs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Network, NetworkDims};
use crate::numerics::{Arithmetic, Scalar};
use crate::schedules::{self, LayerWork, Primitive, ScheduleKind, UnitWidths};

/// Cycles per primitive operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleCosts {
    pub mul: u64,
    pub add: u64,
    pub sub: u64,
    pub cmp: u64,
    pub xnor: u64,
    pub popcount_bit: u64,
    pub shift: u64,
}

impl Default for CycleCosts {
    fn default() -> Self {
        CycleCosts {
            mul: 1,
            add: 1,
            sub: 1,
            cmp: 1,
            xnor: 1,
            popcount_bit: 1,
            shift: 1,
        }
    }
}

impl CycleCosts {
    pub fn cost(&self, p: Primitive) -> u64 {
        match p {
            Primitive::Mul => self.mul,
            Primitive::Add => self.add,
            Primitive::Sub => self.sub,
            Primitive::Cmp => self.cmp,
            Primitive::Xnor => self.xnor,
            Primitive::PopcountBit => self.popcount_bit,
            Primitive::Shift => self.shift,
        }
    }
}

/// Per-unit resource costs, cycle costs, clock and budget of a target device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceProfile {
    pub name: String,
    pub dsp_per_fmul: u64,
    pub dsp_per_fadd: u64,
    pub dsp_per_fcmp: u64,
    pub lut_per_fmul: u64,
    pub lut_per_fadd: u64,
    pub lut_per_fcmp: u64,
    pub lut_per_xnor_bit: u64,
    pub lut_per_popcount_bit: u64,
    pub lut_per_shift: u64,
    /// Glue logic per binary-layer output datapath (score scaling, bias add, pooling).
    pub lut_per_logic_op: u64,
    /// Fixed logic (controller, DMA interface).
    pub lut_base: u64,
    pub bram18k_per_kilobyte_params: f64,
    pub cycles: CycleCosts,
    /// Per-inference control overhead in cycles.
    pub control_cycles: u64,
    pub clock_hz: f64,
    pub dsp_budget: Option<u64>,
    pub lut_budget: Option<u64>,
}

impl Default for ResourceProfile {
    fn default() -> Self {
        ResourceProfile::unit()
    }
}

impl ResourceProfile {
    /// Unit costs everywhere, no control overhead, no budget, 1 Hz clock (so
    /// latency in seconds equals cycles).
    pub fn unit() -> Self {
        ResourceProfile {
            name: "unit".into(),
            dsp_per_fmul: 1,
            dsp_per_fadd: 1,
            dsp_per_fcmp: 1,
            lut_per_fmul: 1,
            lut_per_fadd: 1,
            lut_per_fcmp: 1,
            lut_per_xnor_bit: 1,
            lut_per_popcount_bit: 1,
            lut_per_shift: 1,
            lut_per_logic_op: 1,
            lut_base: 0,
            bram18k_per_kilobyte_params: 1.0 / 2.25,
            cycles: CycleCosts::default(),
            control_cycles: 0,
            clock_hz: 1.0,
            dsp_budget: None,
            lut_budget: None,
        }
    }

    /// Xilinx VC709 at 100 MHz. DSP costs and `control_cycles` are fitted to the
    /// published CNN1/CNN3 figures; LUT costs are rough single-precision core sizes.
    pub fn vc709() -> Self {
        ResourceProfile {
            name: "vc709".into(),
            dsp_per_fmul: 1,
            dsp_per_fadd: 2,
            dsp_per_fcmp: 1,
            lut_per_fmul: 100,
            lut_per_fadd: 220,
            lut_per_fcmp: 40,
            lut_per_xnor_bit: 1,
            lut_per_popcount_bit: 2,
            lut_per_shift: 16,
            lut_per_logic_op: 32,
            lut_base: 38_000,
            bram18k_per_kilobyte_params: 1.0 / 2.25,
            cycles: CycleCosts::default(),
            control_cycles: 1824,
            clock_hz: 100e6,
            dsp_budget: Some(3600),
            lut_budget: Some(433_200),
        }
    }

    /// Xilinx Arty-7 (XC7A35T) at 83 MHz.
    pub fn arty7() -> Self {
        ResourceProfile {
            name: "arty7".into(),
            lut_base: 15_000,
            clock_hz: 83e6,
            dsp_budget: Some(90),
            lut_budget: Some(20_800),
            ..ResourceProfile::vc709()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "unit" => Ok(ResourceProfile::unit()),
            "vc709" => Ok(ResourceProfile::vc709()),
            "arty7" => Ok(ResourceProfile::arty7()),
            _ => Err(Error::config(format!("unknown resource profile {name:?}"))),
        }
    }

    /// Copy without resource budget.
    pub fn unconstrained(&self) -> Self {
        ResourceProfile {
            dsp_budget: None,
            lut_budget: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(Error::config(format!(
                "clock_hz must be positive, got {}",
                self.clock_hz
            )));
        }
        if !(self.bram18k_per_kilobyte_params.is_finite() && self.bram18k_per_kilobyte_params >= 0.0) {
            return Err(Error::config("bram18k_per_kilobyte_params must be finite and >= 0"));
        }
        Ok(())
    }
}

/// DSP and LUT count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Resources {
    pub dsp: u64,
    pub lut: u64,
}

impl std::ops::Add for Resources {
    type Output = Resources;

    fn add(self, o: Resources) -> Resources {
        Resources {
            dsp: self.dsp + o.dsp,
            lut: self.lut + o.lut,
        }
    }
}

impl Resources {
    pub fn fits(&self, profile: &ResourceProfile) -> bool {
        profile.dsp_budget.is_none_or(|b| self.dsp <= b) && profile.lut_budget.is_none_or(|b| self.lut <= b)
    }
}

/// Units instantiated for one layer at the given widths. Every lane carries a
/// multiplier and an adder (or XNOR and popcount for binary layers); each
/// output datapath (`output_channel * feature_map` of them) carries an
/// activation unit and a pooling comparator.
pub fn layer_resources(work: &LayerWork, w: UnitWidths, arithmetic: Arithmetic, p: &ResourceProfile) -> Resources {
    let lanes = w.lanes() as u64;
    let paths = (w.output_channel * w.feature_map) as u64;
    match work {
        LayerWork::Conv(s) if s.binary => Resources {
            dsp: 0,
            lut: lanes * (p.lut_per_xnor_bit + p.lut_per_popcount_bit)
                + paths * (p.lut_per_shift + 2 * p.lut_per_logic_op)
                + paths * p.lut_per_shift
                + paths * p.lut_per_logic_op,
        },
        LayerWork::Conv(_) => {
            let mac = Resources {
                dsp: lanes * (p.dsp_per_fmul + p.dsp_per_fadd),
                lut: lanes * (p.lut_per_fmul + p.lut_per_fadd),
            };
            let act = match arithmetic {
                Arithmetic::Fixed(_) => Resources {
                    dsp: 0,
                    lut: paths * p.lut_per_shift,
                },
                Arithmetic::Real32 | Arithmetic::Real64 => Resources {
                    dsp: paths * (p.dsp_per_fcmp + p.dsp_per_fmul),
                    lut: paths * (p.lut_per_fcmp + p.lut_per_fmul),
                },
            };
            let pool = Resources {
                dsp: paths * p.dsp_per_fcmp,
                lut: paths * p.lut_per_fcmp,
            };
            mac + act + pool
        }
        LayerWork::Fc { .. } => Resources {
            dsp: lanes * (p.dsp_per_fmul + p.dsp_per_fadd),
            lut: lanes * (p.lut_per_fmul + p.lut_per_fadd),
        },
    }
}

/// Whole-design resources: all layers plus the fixed logic.
pub fn design_resources(
    works: &[LayerWork],
    widths: &[UnitWidths],
    arithmetic: Arithmetic,
    p: &ResourceProfile,
) -> Resources {
    works
        .iter()
        .zip(widths)
        .map(|(work, &w)| layer_resources(work, w, arithmetic, p))
        .fold(
            Resources {
                dsp: 0,
                lut: p.lut_base,
            },
            |a, b| a + b,
        )
}

/// Parameter storage in bytes: binary-layer weights take one bit each, all
/// other parameters one word of the arithmetic.
pub fn parameter_bytes(dims: &NetworkDims, arithmetic: Arithmetic) -> Result<f64> {
    let word = match arithmetic {
        Arithmetic::Real32 => 4.0,
        Arithmetic::Real64 => 8.0,
        Arithmetic::Fixed(q) => q.total_bits() as f64 / 8.0,
    };
    let mut bytes = 0.0;
    for s in dims.layer_shapes()? {
        let weights = (s.out_channels * s.taps()) as f64;
        bytes += if s.binary { weights / 8.0 } else { weights * word };
        bytes += s.out_channels as f64 * word;
    }
    bytes += ((dims.fc_in_features()? + 1) * dims.classes) as f64 * word;
    Ok(bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub schedule: ScheduleKind,
    pub dsp: u64,
    pub bram_18kb: f64,
    pub lut: u64,
    pub cycles: u64,
    pub latency_s: f64,
}

pub const REPORT_COLUMNS: [&str; 6] = ["schedule", "dsp", "bram_18kb", "lut", "cycles", "latency_s"];

pub fn estimate(
    dims: &NetworkDims,
    arithmetic: Arithmetic,
    schedule: ScheduleKind,
    profile: &ResourceProfile,
) -> Result<CostReport> {
    let trace = schedules::plan(dims, arithmetic, schedule, profile)?;
    let works = LayerWork::from_dims(dims)?;
    let widths: Vec<UnitWidths> = trace.layers.iter().map(|l| l.widths).collect();
    let res = design_resources(&works, &widths, arithmetic, profile);
    let cycles = trace.cycles();
    Ok(CostReport {
        schedule,
        dsp: res.dsp,
        bram_18kb: parameter_bytes(dims, arithmetic)? / 1024.0 * profile.bram18k_per_kilobyte_params,
        lut: res.lut,
        cycles,
        latency_s: cycles as f64 / profile.clock_hz,
    })
}

pub fn estimate_network<T: Scalar>(
    net: &Network<T>,
    schedule: ScheduleKind,
    profile: &ResourceProfile,
) -> Result<CostReport> {
    estimate(&net.dims(), T::arithmetic(), schedule, profile)
}

/// Writes reports as CSV with the fixed column order of [`REPORT_COLUMNS`].
pub fn write_reports_csv<W: Write>(out: W, reports: &[CostReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.schedule.name().to_string(),
            r.dsp.to_string(),
            format!("{:.4}", r.bram_18kb),
            r.lut.to_string(),
            r.cycles.to_string(),
            format!("{:e}", r.latency_s),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(format!("{other:?}")),
    }
}

/// Measured latency and power of one implementation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformMeasurement {
    pub label: String,
    pub latency_s: f64,
    pub power_w: f64,
}

impl PlatformMeasurement {
    pub fn new(label: impl Into<String>, latency_s: f64, power_w: f64) -> Result<Self> {
        for (name, v) in [("latency", latency_s), ("power", power_w)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(PlatformMeasurement {
            label: label.into(),
            latency_s,
            power_w,
        })
    }
}

/// Fractional latency reduction over fractional power increase, both relative
/// to `base`. `None` when the optimized design is not faster or does not draw
/// more power, where the ratio has no meaning.
pub fn efficiency_index(base: &PlatformMeasurement, optimized: &PlatformMeasurement) -> Option<f64> {
    let gain = (base.latency_s - optimized.latency_s) / base.latency_s;
    let cost = (optimized.power_w - base.power_w) / base.power_w;
    (gain > 0.0 && cost > 0.0).then(|| gain / cost)
}

pub const REFERENCE_RESOURCES_CSV: &str = include_str!("../data/resources.csv");
pub const REFERENCE_PERFORMANCE_CSV: &str = include_str!("../data/performance.csv");

/// One row of the published resource tables.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceResources {
    pub network: String,
    pub freq_mhz: f64,
    pub dsp: u64,
    pub bram_18kb: f64,
    pub lut: u64,
    pub device: String,
}

/// One row of the published performance tables.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferencePerformance {
    pub network: String,
    pub freq_mhz: f64,
    pub latency_s: f64,
    pub power_w: f64,
    pub efficiency_index: Option<f64>,
    pub device: String,
}

impl ReferencePerformance {
    pub fn measurement(&self) -> PlatformMeasurement {
        PlatformMeasurement {
            label: format!("{} ({})", self.network, self.device),
            latency_s: self.latency_s,
            power_w: self.power_w,
        }
    }
}

fn parse_reference<R: for<'de> Deserialize<'de>>(text: &str) -> Vec<R> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .expect("bundled reference table is well-formed")
}

pub fn reference_resources() -> Vec<ReferenceResources> {
    parse_reference(REFERENCE_RESOURCES_CSV)
}

pub fn reference_performance() -> Vec<ReferencePerformance> {
    parse_reference(REFERENCE_PERFORMANCE_CSV)
}

/// Looks up a published performance row by network label and device.
pub fn reference_measurement(network: &str, device: &str) -> Option<PlatformMeasurement> {
    reference_performance()
        .into_iter()
        .find(|r| r.network == network && r.device == device)
        .map(|r| r.measurement())
}
