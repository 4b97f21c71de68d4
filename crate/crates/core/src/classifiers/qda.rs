//! Quadratic discriminant analysis.
//!
//! Each class gets its own Gaussian (mean, covariance, prior). Prediction
//! evaluates the class log-densities, normalises them into posteriors with
//! log-sum-exp, and picks the class with the lowest expected cost under the
//! cost matrix `J[true][predicted]`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{check_training_set, ClassifierError, Prediction};
use crate::features::FeatureVector;
use crate::model::ClassLabel;

const K: usize = ClassLabel::COUNT;

/// `J[true][predicted]`, the cost of predicting `predicted` for an epoch of
/// class `true`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: [[f64; K]; K],
}

impl CostMatrix {
    pub fn zero_one() -> Self {
        let mut values = [[1.0; K]; K];
        for (i, row) in values.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        Self { values }
    }

    pub fn new(values: [[f64; K]; K]) -> Result<Self, ClassifierError> {
        if values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ClassifierError::InvalidConfig(
                "cost matrix entries must be finite and non-negative".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn get(&self, truth: ClassLabel, predicted: ClassLabel) -> f64 {
        self.values[truth.index()][predicted.index()]
    }

    pub fn values(&self) -> &[[f64; K]; K] {
        &self.values
    }
}

impl Default for CostMatrix {
    fn default() -> Self {
        Self::zero_one()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QdaConfig {
    /// `λ` in `Σ + λ·(tr Σ / d)·I`; `None` fits the raw sample covariance.
    pub regularization: Option<f64>,
    pub cost: CostMatrix,
}

impl Default for QdaConfig {
    fn default() -> Self {
        Self {
            regularization: Some(1e-6),
            cost: CostMatrix::zero_one(),
        }
    }
}

/// Fitted parameters of one class.
#[derive(Debug, Clone)]
pub struct ClassGaussian {
    pub prior: f64,
    pub mean: Vec<f64>,
    /// Row-major `d × d`, regularisation included.
    pub covariance: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl PartialEq for ClassGaussian {
    fn eq(&self, other: &Self) -> bool {
        self.prior == other.prior && self.mean == other.mean && self.covariance == other.covariance
    }
}

impl ClassGaussian {
    /// Factorises `covariance`; fails if it is not positive definite.
    pub fn new(prior: f64, mean: Vec<f64>, covariance: Vec<f64>, label: ClassLabel) -> Result<Self, ClassifierError> {
        let d = mean.len();
        if covariance.len() != d * d {
            return Err(ClassifierError::DimensionMismatch {
                expected: d * d,
                got: covariance.len(),
            });
        }
        let m = DMatrix::from_row_slice(d, d, &covariance);
        let chol = Cholesky::new(m).ok_or(ClassifierError::SingularCovariance(label))?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(ClassifierError::SingularCovariance(label));
        }
        Ok(Self {
            prior,
            mean,
            covariance,
            chol,
            log_det,
        })
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `ln P(x | C) + ln P(C)`.
    fn log_joint(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let diff = DVector::from_iterator(d, x.iter().zip(&self.mean).map(|(a, b)| a - b));
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        let mahalanobis = y.norm_squared();
        self.prior.ln() - 0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + self.log_det + mahalanobis)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QdaModel {
    dim: usize,
    classes: Vec<Option<ClassGaussian>>,
    cost: CostMatrix,
    regularization: Option<f64>,
}

impl QdaModel {
    pub fn from_parts(
        dim: usize,
        classes: Vec<Option<ClassGaussian>>,
        cost: CostMatrix,
        regularization: Option<f64>,
    ) -> Result<Self, ClassifierError> {
        if classes.len() != K {
            return Err(ClassifierError::InvalidConfig(format!("expected {K} class slots")));
        }
        if classes.iter().flatten().count() < 2 {
            return Err(ClassifierError::ClassAbsent);
        }
        for c in classes.iter().flatten() {
            if c.mean.len() != dim {
                return Err(ClassifierError::DimensionMismatch {
                    expected: dim,
                    got: c.mean.len(),
                });
            }
        }
        Ok(Self {
            dim,
            classes,
            cost,
            regularization,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class(&self, label: ClassLabel) -> Option<&ClassGaussian> {
        self.classes[label.index()].as_ref()
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    pub fn regularization(&self) -> Option<f64> {
        self.regularization
    }

    /// Posterior over all three classes; absent classes get zero.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if x.len() != self.dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let logs: Vec<Option<f64>> = self.classes.iter().map(|c| c.as_ref().map(|g| g.log_joint(x))).collect();
        let max = logs.iter().flatten().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let weights: Vec<f64> = logs.iter().map(|l| l.map_or(0.0, |v| (v - max).exp())).collect();
        let total: f64 = weights.iter().sum();
        Ok(weights.iter().map(|w| w / total).collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifierError> {
        let posterior = self.posterior(x)?;
        let mut best = ClassLabel::Left;
        let mut best_cost = f64::INFINITY;
        for predicted in ClassLabel::ALL {
            let expected: f64 = ClassLabel::ALL
                .iter()
                .map(|&truth| posterior[truth.index()] * self.cost.get(truth, predicted))
                .sum();
            if expected < best_cost {
                best_cost = expected;
                best = predicted;
            }
        }
        Ok(Prediction {
            label: best,
            scores: posterior,
        })
    }
}

/// Maximum-likelihood class means, unbiased class covariances and empirical
/// priors.
pub fn qda_fit(features: &[FeatureVector], config: &QdaConfig) -> Result<QdaModel, ClassifierError> {
    let d = check_training_set(features)?;
    let n = features.len() as f64;
    let mut groups: [Vec<&FeatureVector>; K] = Default::default();
    for f in features {
        groups[f.label.index()].push(f);
    }
    if groups.iter().filter(|g| !g.is_empty()).count() < 2 {
        return Err(ClassifierError::ClassAbsent);
    }
    if let Some(l) = config.regularization {
        if !(l.is_finite() && l >= 0.0) {
            return Err(ClassifierError::InvalidConfig(format!("regularization {l}")));
        }
    }

    let mut classes = Vec::with_capacity(K);
    for (c, group) in groups.iter().enumerate() {
        if group.is_empty() {
            classes.push(None);
            continue;
        }
        let label = ClassLabel::from_index(c).unwrap();
        let m = group.len() as f64;
        let mut mean = vec![0.0; d];
        for f in group {
            for (acc, v) in mean.iter_mut().zip(&f.values) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);

        let mut cov = vec![0.0; d * d];
        for f in group {
            let diff: Vec<f64> = f.values.iter().zip(&mean).map(|(a, b)| a - b).collect();
            for i in 0..d {
                for j in i..d {
                    cov[i * d + j] += diff[i] * diff[j];
                }
            }
        }
        let denom = (m - 1.0).max(1.0);
        for i in 0..d {
            for j in i..d {
                let v = cov[i * d + j] / denom;
                cov[i * d + j] = v;
                cov[j * d + i] = v;
            }
        }
        if let Some(lambda) = config.regularization {
            let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
            let scale = if trace > 0.0 { trace / d as f64 } else { 1.0 };
            for i in 0..d {
                cov[i * d + i] += lambda * scale;
            }
        }
        classes.push(Some(ClassGaussian::new(m / n, mean, cov, label)?));
    }
    QdaModel::from_parts(d, classes, config.cost.clone(), config.regularization)
}
