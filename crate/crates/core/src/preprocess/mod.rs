//! Outlier rejection, Butterworth bandpass filtering and common average
//! reference, run in that order after channel selection.

mod butterworth;
mod car;
mod outlier;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::ingest::{select_channels, ChannelSelection, IngestError};
use crate::model::{ModelError, SubjectDataset};

pub use butterworth::{apply_filter, design_bandpass, Biquad, BiquadCascade, FilterSpec, OrderConvention};
pub use car::apply_car;
pub use outlier::{reject_outliers, reject_outliers_with, OutlierMode, OutlierReport};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("outlier rejection needs at least 2 epochs, got {0}")]
    TooFewEpochs(usize),
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("designed filter is unstable: pole radius {radius}")]
    UnstableDesign { radius: f64 },
    #[error("filter produced a non-finite output on channel {channel}")]
    NonFiniteOutput { channel: usize },
    #[error("common average reference needs at least 2 channels")]
    SingleChannel,
    #[error("filter sample rate {filter} Hz does not match epoch rate {epoch} Hz")]
    RateMismatch { filter: f64, epoch: f64 },
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Which preprocessing stages run. Defaults follow the reference chain:
/// motor channel selection, single-pass 3σ outlier rejection on epoch means,
/// order-30 8–30 Hz Butterworth bandpass, common average reference.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub selection: Option<ChannelSelection>,
    pub outliers: Option<OutlierMode>,
    pub filter: Option<FilterSpec>,
    pub car: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            selection: Some(ChannelSelection::motor_default()),
            outliers: Some(OutlierMode::EpochMean),
            filter: Some(FilterSpec::default()),
            car: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub dataset: SubjectDataset,
    pub outliers: Option<OutlierReport>,
    pub cascade: Option<BiquadCascade>,
}

/// Runs the configured stages over one subject. The filter is designed with
/// the dataset's own sample rate when it differs from the configured one.
pub fn preprocess_dataset(
    dataset: &SubjectDataset,
    config: &PreprocessConfig,
) -> Result<Preprocessed, PreprocessError> {
    let mut ds = match &config.selection {
        Some(sel) => select_channels(dataset, sel)?,
        None => dataset.clone(),
    };
    let mut report = None;
    if let Some(mode) = config.outliers {
        let (kept, r) = reject_outliers_with(&ds, mode)?;
        ds = kept;
        report = Some(r);
    }
    let mut cascade = None;
    if let Some(spec) = &config.filter {
        if let Some(rate) = ds.sample_rate_hz() {
            let spec = FilterSpec {
                sample_rate_hz: rate,
                ..spec.clone()
            };
            let c = design_bandpass(&spec)?;
            let epochs = ds
                .epochs()
                .iter()
                .map(|e| apply_filter(&c, e))
                .collect::<Result<Vec<_>, _>>()?;
            ds = ds.with_epochs(epochs);
            cascade = Some(c);
        }
    }
    if config.car {
        let epochs = ds.epochs().iter().map(apply_car).collect::<Result<Vec<_>, _>>()?;
        ds = ds.with_epochs(epochs);
    }
    Ok(Preprocessed {
        dataset: ds,
        outliers: report,
        cascade,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PreprocessError + '_ {
    move |source| PreprocessError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

/// Diagnostic dump: `frequency_hz,magnitude,phase_rad` on `points` evenly
/// spaced frequencies from DC to Nyquist.
pub fn write_frequency_response_csv(
    cascade: &BiquadCascade,
    points: usize,
    path: &Path,
) -> Result<(), PreprocessError> {
    let mut out = String::from("frequency_hz,magnitude,phase_rad\n");
    let nyquist = cascade.sample_rate_hz() / 2.0;
    let steps = points.max(2) - 1;
    for i in 0..=steps {
        let f = nyquist * i as f64 / steps as f64;
        let h = cascade.response(f);
        out.push_str(&format!("{f},{},{}\n", h.norm(), h.arg()));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Diagnostic dump: `epoch_index,mean,kept`.
pub fn write_outlier_report_csv(report: &OutlierReport, path: &Path) -> Result<(), PreprocessError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    let write = |w: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        writeln!(w, "epoch_index,mean,kept")?;
        for (i, m) in report.epoch_means.iter().enumerate() {
            writeln!(w, "{i},{m},{}", report.is_kept(i))?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(path))
}
