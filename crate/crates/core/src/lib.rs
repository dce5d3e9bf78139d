//! Software model of FPGA CNN/BCNN symbol-decision accelerators for mm-wave
//! radio-over-fiber receivers.
//!
//! One inference semantics ([`nn`]) runs under three hardware schedules
//! ([`schedules`]) with bit-identical results; [`cost_model`] turns the
//! resulting execution traces into DSP/LUT/BRAM/latency estimates. A synthetic
//! impaired channel ([`channel`]) and a trainer ([`training`]) make BER
//! behavior reproducible without the optical testbed.
//!
//! Everything numeric is generic over [`numerics::Scalar`]; the aliases below
//! name the two arithmetics the hardware paths use.

pub mod channel;
pub mod cost_model;
pub mod error;
pub mod nn;
pub mod numerics;
pub mod schedules;
pub mod training;

pub use error::{Error, Result};

/// Default fixed-point format for hardware-exact runs.
pub type Q16_8 = numerics::Fx<16, 8>;

pub type Tensor32 = nn::Tensor1D<f32>;
pub type TensorQ16_8 = nn::Tensor1D<Q16_8>;
pub type Network32 = nn::Network<f32>;
pub type NetworkQ16_8 = nn::Network<Q16_8>;
