//! Synthetic impaired receive channel standing in for the optical testbed:
//! OOK symbols, NRZ pulses, symbol-spaced ISI, a cubic compression, optional
//! phase noise and AWGN.

mod detect;
pub mod file;
mod sweep;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor1D;
use crate::numerics::Scalar;

pub use detect::{ber, count_errors, Detector, ThresholdDetector};
pub use sweep::{ber_sweep, default_sweep, write_sweep_csv, SweepEntry, SweepPoint, FEC_THRESHOLD, SWEEP_COLUMNS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Symbols covered by one decision window.
    pub symbols_per_frame: usize,
    pub samples_per_symbol: usize,
    /// Symbol-spaced FIR taps; tap `j` delays by `j` symbols.
    pub isi_taps: Vec<f64>,
    /// `g` in `y = x - g x^3`.
    pub nonlinearity_gain: f64,
    /// Signal-to-noise ratio per sample; `inf` disables noise.
    pub snr_db: f64,
    /// Phase-noise linewidth relative to the symbol rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_noise_linewidth: Option<f64>,
    pub rng_seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            symbols_per_frame: 4,
            samples_per_symbol: 8,
            isi_taps: vec![0.9, 0.45, 0.2],
            nonlinearity_gain: 0.1,
            snr_db: 12.0,
            phase_noise_linewidth: None,
            rng_seed: 1,
        }
    }
}

impl ChannelConfig {
    /// No ISI, no compression, no noise.
    pub fn clean(rng_seed: u64) -> Self {
        ChannelConfig {
            isi_taps: vec![1.0],
            nonlinearity_gain: 0.0,
            snr_db: f64::INFINITY,
            rng_seed,
            ..ChannelConfig::default()
        }
    }

    pub fn window_len(&self) -> usize {
        self.symbols_per_frame * self.samples_per_symbol
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_symbol == 0 || self.symbols_per_frame == 0 {
            return Err(Error::config("samples_per_symbol and symbols_per_frame must be >= 1"));
        }
        if self.isi_taps.is_empty() {
            return Err(Error::config("isi_taps must not be empty"));
        }
        if self.isi_taps.iter().any(|t| !t.is_finite()) || !self.nonlinearity_gain.is_finite() {
            return Err(Error::config("channel coefficients must be finite"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::config(format!("invalid snr_db {}", self.snr_db)));
        }
        if let Some(lw) = self.phase_noise_linewidth {
            if !(lw.is_finite() && lw >= 0.0) {
                return Err(Error::config(format!("invalid phase_noise_linewidth {lw}")));
            }
        }
        Ok(())
    }
}

/// Decision windows with their transmitted bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: ChannelConfig,
    window_len: usize,
    samples: Vec<f32>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(config: ChannelConfig, window_len: usize, samples: Vec<f32>, labels: Vec<u8>) -> Result<Self> {
        if window_len == 0 || samples.len() != window_len * labels.len() {
            return Err(Error::domain(format!(
                "{} samples do not form {} windows of length {window_len}",
                samples.len(),
                labels.len()
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("dataset contains non-finite samples"));
        }
        Ok(Dataset {
            config,
            window_len,
            samples,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn window(&self, i: usize) -> &[f32] {
        &self.samples[i * self.window_len..(i + 1) * self.window_len]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    /// Window `i` as a single-channel network input.
    pub fn tensor<T: Scalar>(&self, i: usize) -> Tensor1D<T> {
        Tensor1D::from_parts_unchecked(
            1,
            self.window_len,
            self.window(i).iter().map(|&v| T::from_f32(v)).collect(),
        )
    }

    /// Frames `[start, end)` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            config: self.config.clone(),
            window_len: self.window_len,
            samples: self.samples[start * self.window_len..end * self.window_len].to_vec(),
            labels: self.labels[start..end].to_vec(),
        }
    }

    /// Frames of `self` followed by those of `other`. Keeps `self`'s config.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.window_len != self.window_len {
            return Err(Error::domain(
                "cannot concatenate datasets with different window lengths",
            ));
        }
        let mut out = self.clone();
        out.samples.extend_from_slice(&other.samples);
        out.labels.extend_from_slice(&other.labels);
        Ok(out)
    }
}

/// Received waveform for `bits`, one entry per sample.
fn receive(cfg: &ChannelConfig, bits: &[u8], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let sps = cfg.samples_per_symbol;
    let n = bits.len() * sps;
    // NRZ pulses through the symbol-spaced FIR, then the compression
    let mut y: Vec<f64> = (0..n)
        .map(|t| {
            let sym = t / sps;
            let x: f64 = cfg
                .isi_taps
                .iter()
                .enumerate()
                .filter(|(j, _)| *j <= sym)
                .map(|(j, h)| h * bits[sym - j] as f64)
                .sum();
            x - cfg.nonlinearity_gain * x * x * x
        })
        .collect();

    if let Some(lw) = cfg.phase_noise_linewidth.filter(|&lw| lw > 0.0) {
        let step = Normal::new(0.0, (2.0 * PI * lw / sps as f64).sqrt()).map_err(|e| Error::config(e.to_string()))?;
        let mut theta = 0.0;
        for v in &mut y {
            theta += step.sample(rng);
            *v *= theta.cos();
        }
    }

    if cfg.snr_db.is_finite() {
        let power = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let sigma = (power / 10f64.powf(cfg.snr_db / 10.0)).sqrt();
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::config(e.to_string()))?;
        for v in &mut y {
            *v += noise.sample(rng);
        }
    }
    Ok(y)
}

/// `n_symbols` labelled windows, each centred on the centre sample of its symbol.
/// Guard symbols are transmitted on both sides so every window is complete.
pub fn generate(cfg: &ChannelConfig, n_symbols: usize) -> Result<Dataset> {
    cfg.validate()?;
    if n_symbols == 0 {
        return Err(Error::config("n_symbols must be >= 1"));
    }
    let sps = cfg.samples_per_symbol;
    let len = cfg.window_len();
    let half = len / 2;
    let guard = half.div_ceil(sps) + cfg.isi_taps.len();
    let total = n_symbols + 2 * guard;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let bits: Vec<u8> = (0..total).map(|_| rng.random_range(0..2u8)).collect();
    let y = receive(cfg, &bits, &mut rng)?;

    let mut samples = Vec::with_capacity(n_symbols * len);
    let mut labels = Vec::with_capacity(n_symbols);
    for (k, &bit) in bits.iter().enumerate().skip(guard).take(n_symbols) {
        let centre = k * sps + sps / 2;
        samples.extend(y[centre - half..centre - half + len].iter().map(|&v| v as f32));
        labels.push(bit);
    }
    Dataset::new(cfg.clone(), len, samples, labels)
}
