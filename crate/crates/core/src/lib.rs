//! Offline motor-imagery EEG classification.
//!
//! The crate covers the whole single-subject chain:
//!
//! ```text
//! EPB1 file / synthetic generator
//!   ├─ ingest::select_channels      10 sensorimotor electrodes
//!   ├─ preprocess::reject_outliers  3σ test on epoch means
//!   ├─ preprocess::design_bandpass  8–30 Hz Butterworth, second-order sections
//!   ├─ preprocess::apply_car        common average reference
//!   ├─ features::extract_features   energy + instantaneous spectral entropy
//!   ├─ classifiers                  QDA, fine/cosine KNN, wide NN
//!   └─ evaluation                   80/20 split, confusion, macro metrics, reports
//! ```
//!
//! Every stage is a plain function over immutable values, so subjects can be
//! processed in parallel without shared state.

pub mod classifiers;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod model;
pub mod preprocess;

pub use classifiers::{ModelKind, ModelSpec, Prediction, TrainedModel};
pub use error::{Error, Result};
pub use evaluation::{
    confusion, metrics_from_confusion, run_corpus, run_subject, ConfusionMatrix, MetricSet,
    PipelineConfig, SubjectResult,
};
pub use features::{extract_features, FeatureParams, FeatureVector};
pub use ingest::{
    generate_synthetic, read_epoch_file, select_channels, write_epoch_file, ChannelSelection,
    SyntheticSpec,
};
pub use model::{stratified_split, ClassLabel, Epoch, Provenance, SplitIndices, SubjectDataset};
pub use preprocess::{apply_car, apply_filter, design_bandpass, reject_outliers, BiquadCascade, FilterSpec};
