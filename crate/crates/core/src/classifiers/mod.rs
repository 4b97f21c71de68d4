//! Classifiers over fixed-length feature vectors.
//!
//! Four families are provided: QDA, fine KNN (k = 1, Euclidean), cosine KNN
//! (k = 10) and a single-hidden-layer network. [`TrainedModel`] wraps them
//! behind one fit/predict/serialize interface.

pub mod knn;
pub mod nn;
pub mod qda;
pub mod serialize;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::features::FeatureVector;
use crate::model::ClassLabel;

pub use knn::{knn_fit, DistanceMetric, KnnConfig, KnnModel};
pub use nn::{nn_fit, nn_fit_with_trace, softmax, NnConfig, WideNnModel};
pub use qda::{qda_fit, ClassGaussian, CostMatrix, QdaConfig, QdaModel};
pub use serialize::{peek_model_info, ModelInfo, MDL1_MAGIC, MDL1_VERSION};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("training set needs at least two classes")]
    ClassAbsent,
    #[error("covariance of class {0} is not positive definite")]
    SingularCovariance(ClassLabel),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k = {k} exceeds the {n} training points")]
    KTooLarge { k: usize, n: usize },
    #[error("training vector {0} has zero norm under the cosine metric")]
    ZeroNormTraining(usize),
    #[error("query vector has zero norm under the cosine metric")]
    ZeroNormQuery,
    #[error("training diverged at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad model file: expected magic MDL1, found {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("model file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Predicted class plus one score per class (posterior, vote fraction or
/// softmax output depending on the model).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: ClassLabel,
    pub scores: Vec<f64>,
}

/// Non-empty with a common, non-zero dimension; returns that dimension.
pub(crate) fn check_training_set(features: &[FeatureVector]) -> Result<usize, ClassifierError> {
    let dim = features.first().ok_or(ClassifierError::EmptyTrainingSet)?.dim();
    if dim == 0 {
        return Err(ClassifierError::DimensionMismatch { expected: 1, got: 0 });
    }
    if let Some(f) = features.iter().find(|f| f.dim() != dim) {
        return Err(ClassifierError::DimensionMismatch { expected: dim, got: f.dim() });
    }
    Ok(dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Qda,
    FineKnn,
    CosKnn,
    WideNn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Qda, ModelKind::FineKnn, ModelKind::CosKnn, ModelKind::WideNn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Qda => "qda",
            ModelKind::FineKnn => "fine-knn",
            ModelKind::CosKnn => "cos-knn",
            ModelKind::WideNn => "wide-nn",
        }
    }

    /// Default hyper-parameters for this family.
    pub fn default_spec(self) -> ModelSpec {
        match self {
            ModelKind::Qda => ModelSpec::Qda(QdaConfig::default()),
            ModelKind::FineKnn => ModelSpec::Knn(KnnConfig::fine()),
            ModelKind::CosKnn => ModelSpec::Knn(KnnConfig::cosine()),
            ModelKind::WideNn => ModelSpec::WideNn(NnConfig::default()),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ClassifierError::InvalidConfig(format!("unknown model {s:?} (qda, fine-knn, cos-knn, wide-nn)")))
    }
}

/// A model family with its hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Qda(QdaConfig),
    Knn(KnnConfig),
    WideNn(NnConfig),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Qda(_) => ModelKind::Qda,
            ModelSpec::Knn(c) => knn_kind(c.metric),
            ModelSpec::WideNn(_) => ModelKind::WideNn,
        }
    }

    pub fn fit(&self, features: &[FeatureVector]) -> Result<TrainedModel, ClassifierError> {
        Ok(match self {
            ModelSpec::Qda(c) => TrainedModel::Qda(qda_fit(features, c)?),
            ModelSpec::Knn(c) => TrainedModel::Knn(knn_fit(features, *c)?),
            ModelSpec::WideNn(c) => TrainedModel::WideNn(nn_fit(features, c)?),
        })
    }
}

impl From<ModelKind> for ModelSpec {
    fn from(kind: ModelKind) -> Self {
        kind.default_spec()
    }
}

fn knn_kind(metric: DistanceMetric) -> ModelKind {
    match metric {
        DistanceMetric::Euclidean => ModelKind::FineKnn,
        DistanceMetric::Cosine => ModelKind::CosKnn,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Qda(QdaModel),
    Knn(KnnModel),
    WideNn(WideNnModel),
}

impl TrainedModel {
    pub fn fit(spec: &ModelSpec, features: &[FeatureVector]) -> Result<Self, ClassifierError> {
        spec.fit(features)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Qda(_) => ModelKind::Qda,
            TrainedModel::Knn(m) => knn_kind(m.metric()),
            TrainedModel::WideNn(_) => ModelKind::WideNn,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Qda(m) => m.dim(),
            TrainedModel::Knn(m) => m.dim(),
            TrainedModel::WideNn(m) => m.dim(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifierError> {
        match self {
            TrainedModel::Qda(m) => m.predict(x),
            TrainedModel::Knn(m) => m.predict(x),
            TrainedModel::WideNn(m) => m.predict(x),
        }
    }

    pub fn predict_all(&self, features: &[FeatureVector]) -> Result<Vec<Prediction>, ClassifierError> {
        features.iter().map(|f| self.predict(&f.values)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serialize::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ClassifierError> {
        serialize::decode(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| ClassifierError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        let bytes = std::fs::read(path).map_err(|source| ClassifierError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            assert_eq!(k.default_spec().kind(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
        assert_eq!(" Fine-KNN ".parse::<ModelKind>().unwrap(), ModelKind::FineKnn);
    }

    #[test]
    fn training_set_checks() {
        assert!(matches!(check_training_set(&[]), Err(ClassifierError::EmptyTrainingSet)));
        let a = FeatureVector::new(vec![1.0, 2.0], ClassLabel::Left, 1).unwrap();
        let b = FeatureVector::new(vec![1.0], ClassLabel::Right, 1).unwrap();
        assert!(matches!(
            check_training_set(&[a.clone(), b]),
            Err(ClassifierError::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert_eq!(check_training_set(&[a]).unwrap(), 2);
    }
}
