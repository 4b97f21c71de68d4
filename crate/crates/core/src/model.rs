//! Domain vocabulary shared by every stage: class labels, epochs, per-subject
//! datasets and train/test splits.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("epoch has {rows} data rows but {names} channel names")]
    RaggedEpoch { rows: usize, names: usize },
    #[error("epoch contains a non-finite sample at channel {channel}, sample {sample}")]
    NonFiniteSample { channel: usize, sample: usize },
    #[error("epoch has no samples")]
    NoSamples,
    #[error("sample rate must be positive and finite, got {0}")]
    BadSampleRate(f64),
    #[error("subject id must be positive")]
    BadSubjectId,
    #[error("epoch {index} does not match the dataset geometry: {reason}")]
    InconsistentEpoch { index: usize, reason: &'static str },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {label} has {count} epochs, at least 2 are required")]
    ClassTooSmall { label: ClassLabel, count: usize },
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadTrainFraction(f64),
    #[error("dataset needs epochs of at least two classes, found {0}")]
    TooFewClasses(usize),
}

/// Motor-imagery class with a fixed integer encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Left = 0,
    Right = 1,
    Rest = 2,
}

impl ClassLabel {
    pub const COUNT: usize = 3;
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Left, ClassLabel::Right, ClassLabel::Rest];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ClassLabel::Left),
            1 => Some(ClassLabel::Right),
            2 => Some(ClassLabel::Rest),
            _ => None,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        u8::try_from(index).ok().and_then(Self::from_code)
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Left => "left",
            ClassLabel::Right => "right",
            ClassLabel::Rest => "rest",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "0" => Ok(ClassLabel::Left),
            "right" | "1" => Ok(ClassLabel::Right),
            "rest" | "2" => Ok(ClassLabel::Rest),
            other => Err(format!("unknown class label '{other}'")),
        }
    }
}

/// One trial: a `[channels × samples]` matrix of microvolt samples.
///
/// Construction validates the shape and rejects non-finite samples, so every
/// `Epoch` in circulation is well formed.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    subject_id: u16,
    label: ClassLabel,
    data: Array2<f64>,
    sample_rate_hz: f64,
    channel_names: Arc<[String]>,
}

impl Epoch {
    pub fn new(
        subject_id: u16,
        label: ClassLabel,
        data: Array2<f64>,
        sample_rate_hz: f64,
        channel_names: impl Into<Arc<[String]>>,
    ) -> Result<Self, ModelError> {
        let channel_names = channel_names.into();
        if subject_id == 0 {
            return Err(ModelError::BadSubjectId);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(ModelError::BadSampleRate(sample_rate_hz));
        }
        if data.nrows() != channel_names.len() {
            return Err(ModelError::RaggedEpoch {
                rows: data.nrows(),
                names: channel_names.len(),
            });
        }
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(ModelError::NoSamples);
        }
        check_finite(&data)?;
        Ok(Self {
            subject_id,
            label,
            data,
            sample_rate_hz,
            channel_names,
        })
    }

    /// Same metadata, new sample matrix. The replacement is validated like a
    /// fresh epoch.
    pub fn with_data(&self, data: Array2<f64>) -> Result<Self, ModelError> {
        Self::new(
            self.subject_id,
            self.label,
            data,
            self.sample_rate_hz,
            Arc::clone(&self.channel_names),
        )
    }

    pub(crate) fn with_data_and_channels(
        &self,
        data: Array2<f64>,
        channel_names: Arc<[String]>,
    ) -> Result<Self, ModelError> {
        Self::new(self.subject_id, self.label, data, self.sample_rate_hz, channel_names)
    }

    pub fn subject_id(&self) -> u16 {
        self.subject_id
    }

    pub fn label(&self) -> ClassLabel {
        self.label
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Mean over all channels and samples.
    pub fn mean(&self) -> f64 {
        self.data.sum() / self.data.len() as f64
    }
}

fn check_finite(data: &Array2<f64>) -> Result<(), ModelError> {
    for ((channel, sample), v) in data.indexed_iter() {
        if !v.is_finite() {
            return Err(ModelError::NonFiniteSample { channel, sample });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Real,
    Synthetic,
}

/// All epochs recorded for one subject. Every epoch shares the subject id,
/// channel table, sample count and sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectDataset {
    subject_id: u16,
    provenance: Provenance,
    epochs: Vec<Epoch>,
}

impl SubjectDataset {
    pub fn new(
        subject_id: u16,
        provenance: Provenance,
        epochs: Vec<Epoch>,
    ) -> Result<Self, ModelError> {
        if subject_id == 0 {
            return Err(ModelError::BadSubjectId);
        }
        if let Some(first) = epochs.first() {
            for (index, e) in epochs.iter().enumerate() {
                let reason = if e.subject_id != subject_id {
                    Some("subject id differs")
                } else if e.channel_names != first.channel_names {
                    Some("channel table differs")
                } else if e.n_samples() != first.n_samples() {
                    Some("sample count differs")
                } else if e.sample_rate_hz.to_bits() != first.sample_rate_hz.to_bits() {
                    Some("sample rate differs")
                } else {
                    None
                };
                if let Some(reason) = reason {
                    return Err(ModelError::InconsistentEpoch { index, reason });
                }
            }
        }
        Ok(Self {
            subject_id,
            provenance,
            epochs,
        })
    }

    pub fn subject_id(&self) -> u16 {
        self.subject_id
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn into_epochs(self) -> Vec<Epoch> {
        self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn n_channels(&self) -> Option<usize> {
        self.epochs.first().map(Epoch::n_channels)
    }

    pub fn n_samples(&self) -> Option<usize> {
        self.epochs.first().map(Epoch::n_samples)
    }

    pub fn sample_rate_hz(&self) -> Option<f64> {
        self.epochs.first().map(Epoch::sample_rate_hz)
    }

    pub fn channel_names(&self) -> Option<&[String]> {
        self.epochs.first().map(Epoch::channel_names)
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.epochs.iter().map(Epoch::label).collect()
    }

    /// Epoch count per class, indexed by class code.
    pub fn class_counts(&self) -> [usize; ClassLabel::COUNT] {
        let mut counts = [0; ClassLabel::COUNT];
        for e in &self.epochs {
            counts[e.label.index()] += 1;
        }
        counts
    }

    /// Fails unless at least two classes are represented.
    pub fn ensure_trainable(&self) -> Result<(), ModelError> {
        if self.epochs.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let present = self.class_counts().iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(ModelError::TooFewClasses(present));
        }
        Ok(())
    }

    /// Keeps the epochs at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            subject_id: self.subject_id,
            provenance: self.provenance,
            epochs: indices.iter().map(|&i| self.epochs[i].clone()).collect(),
        }
    }

    pub(crate) fn with_epochs(&self, epochs: Vec<Epoch>) -> Self {
        Self {
            subject_id: self.subject_id,
            provenance: self.provenance,
            epochs,
        }
    }
}

/// Disjoint train/test index lists over a dataset's epochs, both sorted
/// ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Per-class shuffled split.
///
/// The total training count is `ceil(fraction · n)`; it is distributed over
/// classes by largest remainder (ties to the lower class code), and every
/// class keeps at least one epoch on each side.
pub fn stratified_split(
    dataset: &SubjectDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitIndices, ModelError> {
    let labels = dataset.labels();
    stratified_split_labels(&labels, train_fraction, seed)
}

pub(crate) fn stratified_split_labels(
    labels: &[ClassLabel],
    train_fraction: f64,
    seed: u64,
) -> Result<SplitIndices, ModelError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ModelError::BadTrainFraction(train_fraction));
    }
    if labels.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut groups: [Vec<usize>; ClassLabel::COUNT] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        groups[l.index()].push(i);
    }
    let present = groups.iter().filter(|g| !g.is_empty()).count();
    for label in ClassLabel::ALL {
        let count = groups[label.index()].len();
        if count == 1 || (count == 0 && present < 2) {
            return Err(ModelError::ClassTooSmall { label, count });
        }
    }

    let n = labels.len() as f64;
    // 1e-9 guards against 0.8 * 100 = 80.000000000000004 style rounding.
    let target = (train_fraction * n - 1e-9).ceil() as usize;
    let mut quota: Vec<(usize, f64)> = groups
        .iter()
        .map(|g| {
            let exact = train_fraction * g.len() as f64;
            let base = (exact + 1e-9).floor();
            (base as usize, exact - base)
        })
        .collect();
    let assigned: usize = quota.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..ClassLabel::COUNT)
        .filter(|&c| !groups[c].is_empty())
        .collect();
    order.sort_by(|&a, &b| quota[b].1.total_cmp(&quota[a].1).then(a.cmp(&b)));
    for &c in order.iter().cycle().take(target.saturating_sub(assigned)) {
        quota[c].0 += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, group) in groups.iter_mut().enumerate() {
        if group.is_empty() {
            continue;
        }
        group.shuffle(&mut rng);
        let k = quota[c].0.clamp(1, group.len() - 1);
        train.extend_from_slice(&group[..k]);
        test.extend_from_slice(&group[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test, seed })
}
