//! Per-channel energy and instantaneous spectral entropy (ISE).
//!
//! A feature vector for an `N`-channel epoch has `3N` entries laid out as
//! `[energy(ch 1..N), mean ISE(ch 1..N), std ISE(ch 1..N)]`. The ISE time
//! series of each channel is reduced to its mean and population standard
//! deviation over spectrogram frames.

mod entropy;
mod spectrum;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::model::{ClassLabel, Epoch};

pub use entropy::{entropy_bits, instantaneous_spectral_entropy, spectral_entropy, spectral_probabilities};
pub use spectrum::{hamming, power_spectrum, spectrogram, spectrum_energy, Spectrogram, StftPlan};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("signal is empty")]
    EmptySignal,
    #[error("spectrum has no power")]
    AllZeroSpectrum,
    #[error("channel {channel} is identically zero")]
    ZeroChannel { channel: usize },
    #[error("spectrum contains a negative or non-finite bin")]
    NegativePower,
    #[error("spectrogram frame {frame} has no power")]
    ZeroPowerFrame { frame: usize },
    #[error("window of {window} samples exceeds signal length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("hop must be at least one sample")]
    BadHop,
    #[error("feature vector is not finite at index {0}")]
    NonFinite(usize),
    #[error("feature dimension {got} does not match {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Spectrogram geometry used for the ISE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureParams {
    pub window: usize,
    pub hop: usize,
}

impl Default for FeatureParams {
    /// 0.5 s Hamming window with 50 % overlap at 512 Hz.
    fn default() -> Self {
        Self { window: 256, hop: 128 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: ClassLabel,
    pub subject_id: u16,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, label: ClassLabel, subject_id: u16) -> Result<Self, FeatureError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        Ok(Self { values, label, subject_id })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Σ x(n)² over all samples.
pub fn energy(signal: &[f64]) -> Result<f64, FeatureError> {
    if signal.is_empty() {
        return Err(FeatureError::EmptySignal);
    }
    Ok(signal.iter().map(|v| v * v).sum())
}

/// Holds the FFT plan so that a whole dataset can be featurised without
/// re-planning per channel.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    params: FeatureParams,
    plan: StftPlan,
}

impl FeatureExtractor {
    pub fn new(params: FeatureParams) -> Result<Self, FeatureError> {
        if params.hop == 0 {
            return Err(FeatureError::BadHop);
        }
        if params.window == 0 {
            return Err(FeatureError::WindowTooLong { window: 0, len: 0 });
        }
        Ok(Self {
            params,
            plan: StftPlan::new(params.window),
        })
    }

    pub fn params(&self) -> FeatureParams {
        self.params
    }

    pub fn extract(&self, epoch: &Epoch) -> Result<FeatureVector, FeatureError> {
        let n = epoch.n_channels();
        let mut values = vec![0.0; 3 * n];
        for (c, row) in epoch.data().rows().into_iter().enumerate() {
            let x = row.to_vec();
            let e = energy(&x)?;
            if e == 0.0 {
                // Surfaced as the spectral error: a silent channel has no
                // spectral distribution at all.
                return Err(FeatureError::AllZeroSpectrum);
            }
            let spec = self.plan.run(&x, self.params.hop, epoch.sample_rate_hz())?;
            let ise = instantaneous_spectral_entropy(&spec)?;
            let frames = ise.len() as f64;
            let mean = ise.iter().sum::<f64>() / frames;
            let var = ise.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / frames;
            values[c] = e;
            values[n + c] = mean;
            values[2 * n + c] = var.sqrt();
        }
        FeatureVector::new(values, epoch.label(), epoch.subject_id())
    }

    pub fn extract_all(&self, epochs: &[Epoch]) -> Result<Vec<FeatureVector>, FeatureError> {
        epochs.iter().map(|e| self.extract(e)).collect()
    }
}

/// Energy and ISE summaries for one epoch.
pub fn extract_features(epoch: &Epoch, window: usize, hop: usize) -> Result<FeatureVector, FeatureError> {
    FeatureExtractor::new(FeatureParams { window, hop })?.extract(epoch)
}

/// Per-feature z-scoring fitted on a training set. Off in the reference
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Columns with zero spread are centred but left unscaled.
    pub fn fit(features: &[FeatureVector]) -> Self {
        let d = features.first().map_or(0, FeatureVector::dim);
        let n = features.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for f in features {
            for (m, v) in mean.iter_mut().zip(&f.values) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for f in features {
            for ((s, v), m) in scale.iter_mut().zip(&f.values).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let scale = scale
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn apply_all(&self, features: &[FeatureVector]) -> Vec<FeatureVector> {
        features
            .iter()
            .map(|f| FeatureVector {
                values: self.apply(&f.values),
                ..f.clone()
            })
            .collect()
    }
}

/// Feature matrix as CSV: `subject,label,f0..f{d-1}`.
pub fn write_feature_csv(features: &[FeatureVector], path: &Path) -> Result<(), FeatureError> {
    let io = |source| FeatureError::IoFailure {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    let d = features.first().map_or(0, FeatureVector::dim);
    let mut header = String::from("subject,label");
    for i in 0..d {
        header.push_str(&format!(",f{i}"));
    }
    writeln!(w, "{header}").map_err(io)?;
    for f in features {
        let mut line = format!("{},{}", f.subject_id, f.label.name());
        for v in &f.values {
            line.push_str(&format!(",{v}"));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}
