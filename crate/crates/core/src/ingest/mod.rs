//! Getting epochs into the pipeline: the EPB1 container, sensorimotor channel
//! selection and the synthetic subject generator.

mod channels;
mod format;
mod synthetic;

use thiserror::Error;

use crate::model::ModelError;

pub use channels::{select_channels, ChannelSelection, Hemisphere, DEFAULT_MOTOR_CHANNELS};
pub use format::{
    encode_epoch_file, parse_epoch_file, read_epoch_file, read_epoch_header, write_epoch_file,
    EpochFileHeader, EPB1_MAGIC, EPB1_VERSION,
};
pub use synthetic::{generate_subject, generate_synthetic, SyntheticSpec};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("bad magic {found:?}, expected \"EPB1\"")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported EPB1 version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated payload: needed {expected} bytes for {what}, {actual} available")]
    TruncatedPayload {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("label {value} of epoch {index} is outside 0..=2")]
    LabelOutOfRange { index: usize, value: u8 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("channel name {0} is not valid UTF-8")]
    InvalidName(usize),
    #[error("dataset has no epochs")]
    EmptyDataset,
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("invalid channel selection: {0}")]
    InvalidSelection(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}
