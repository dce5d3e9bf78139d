use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::numerics::Scalar;

/// Symbol decision from received windows.
pub trait Detector: Sync {
    fn decide_all(&self, ds: &Dataset) -> Result<Vec<u8>>;
}

impl<T: Scalar> Detector for Network<T> {
    fn decide_all(&self, ds: &Dataset) -> Result<Vec<u8>> {
        (0..ds.len())
            .map(|i| self.forward(&ds.tensor::<T>(i)).map(|inf| inf.decision as u8))
            .collect()
    }
}

/// Decides 1 when the centre sample exceeds the mean centre sample of the
/// dataset.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThresholdDetector;

impl Detector for ThresholdDetector {
    fn decide_all(&self, ds: &Dataset) -> Result<Vec<u8>> {
        let mid = ds.window_len() / 2;
        let centres: Vec<f64> = (0..ds.len()).map(|i| ds.window(i)[mid] as f64).collect();
        let threshold = centres.iter().sum::<f64>() / centres.len().max(1) as f64;
        Ok(centres.iter().map(|&c| (c > threshold) as u8).collect())
    }
}

pub fn count_errors(decisions: &[u8], labels: &[u8]) -> Result<usize> {
    if decisions.len() != labels.len() {
        return Err(Error::domain(format!(
            "{} decisions for {} labels",
            decisions.len(),
            labels.len()
        )));
    }
    Ok(decisions.iter().zip(labels).filter(|(d, l)| d != l).count())
}

/// Fraction of wrong decisions.
pub fn ber(decisions: &[u8], labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::domain("BER of an empty label set"));
    }
    Ok(count_errors(decisions, labels)? as f64 / labels.len() as f64)
}
