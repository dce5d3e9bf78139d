use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{count_errors, generate, ChannelConfig, Detector};
use crate::error::{Error, Result};

/// Hard-decision FEC limit with 7% overhead.
pub const FEC_THRESHOLD: f64 = 3.8e-3;

pub const SWEEP_COLUMNS: [&str; 6] = ["config_id", "snr_db", "isi_id", "n_symbols", "errors", "ber"];

/// One sweep configuration; `isi_id` groups configurations sharing an ISI profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub isi_id: usize,
    pub config: ChannelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub config_id: usize,
    pub snr_db: f64,
    pub isi_id: usize,
    pub n_symbols: usize,
    pub errors: usize,
    pub ber: f64,
}

/// The bundled sweep: an unimpaired reference row, then the default ISI and
/// compression profile from 6 to 20 dB in 2 dB steps.
pub fn default_sweep(rng_seed: u64) -> Vec<SweepEntry> {
    let mut out = vec![SweepEntry {
        isi_id: 0,
        config: ChannelConfig::clean(rng_seed),
    }];
    for snr in (6..=20).step_by(2) {
        out.push(SweepEntry {
            isi_id: 1,
            config: ChannelConfig {
                snr_db: snr as f64,
                rng_seed,
                ..ChannelConfig::default()
            },
        });
    }
    out
}

/// BER of `detector` at every entry. Entry `i` draws its own dataset with seed
/// `config.rng_seed ^ i`; entries run in parallel but results are in entry order.
pub fn ber_sweep<D: Detector + ?Sized>(
    detector: &D,
    entries: &[SweepEntry],
    n_symbols: usize,
) -> Result<Vec<SweepPoint>> {
    entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let cfg = ChannelConfig {
                rng_seed: e.config.rng_seed ^ i as u64,
                ..e.config.clone()
            };
            let ds = generate(&cfg, n_symbols)?;
            let errors = count_errors(&detector.decide_all(&ds)?, ds.labels())?;
            Ok(SweepPoint {
                config_id: i,
                snr_db: cfg.snr_db,
                isi_id: e.isi_id,
                n_symbols,
                errors,
                ber: errors as f64 / n_symbols as f64,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(out: W, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let err = |e: csv::Error| Error::format(e.to_string());
    w.write_record(SWEEP_COLUMNS).map_err(err)?;
    for p in points {
        w.serialize(p).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ThresholdDetector;

    #[test]
    fn clean_row_has_zero_ber() {
        let entries = default_sweep(5);
        let points = ber_sweep(&ThresholdDetector, &entries[..2], 2000).unwrap();
        assert_eq!(points[0].errors, 0);
        assert_eq!(points[0].isi_id, 0);
        assert!(points[1].ber > 0.0);
    }

    #[test]
    fn csv_layout() {
        let p = SweepPoint {
            config_id: 0,
            snr_db: f64::INFINITY,
            isi_id: 0,
            n_symbols: 10,
            errors: 0,
            ber: 0.0,
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[p]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "config_id,snr_db,isi_id,n_symbols,errors,ber\n0,inf,0,10,0,0.0\n");
    }
}
