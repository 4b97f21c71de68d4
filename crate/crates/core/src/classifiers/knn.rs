use std::cmp::Ordering;

use super::{check_training_set, ClassifierError, Prediction};
use crate::features::FeatureVector;
use crate::model::ClassLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMetric {
    Euclidean,
    /// `1 − cos θ`.
    Cosine,
}

impl DistanceMetric {
    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Cosine => "cosine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnConfig {
    pub k: usize,
    pub metric: DistanceMetric,
}

impl KnnConfig {
    /// One neighbour, Euclidean distance.
    pub fn fine() -> Self {
        Self { k: 1, metric: DistanceMetric::Euclidean }
    }

    /// Ten neighbours, cosine distance.
    pub fn cosine() -> Self {
        Self { k: 10, metric: DistanceMetric::Cosine }
    }
}

/// Memorised training set.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    dim: usize,
    k: usize,
    metric: DistanceMetric,
    /// Row-major `n × dim`.
    points: Vec<f64>,
    labels: Vec<ClassLabel>,
    norms: Vec<f64>,
}

impl KnnModel {
    pub fn from_parts(
        dim: usize,
        k: usize,
        metric: DistanceMetric,
        points: Vec<f64>,
        labels: Vec<ClassLabel>,
    ) -> Result<Self, ClassifierError> {
        if dim == 0 || points.len() != dim * labels.len() {
            return Err(ClassifierError::DimensionMismatch {
                expected: dim * labels.len(),
                got: points.len(),
            });
        }
        if labels.is_empty() {
            return Err(ClassifierError::EmptyTrainingSet);
        }
        if k == 0 || k > labels.len() {
            return Err(ClassifierError::KTooLarge { k, n: labels.len() });
        }
        let norms: Vec<f64> = points.chunks_exact(dim).map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        if metric == DistanceMetric::Cosine {
            if let Some(i) = norms.iter().position(|&n| n == 0.0) {
                return Err(ClassifierError::ZeroNormTraining(i));
            }
        }
        Ok(Self { dim, k, metric, points, labels, norms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn n_points(&self) -> usize {
        self.labels.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    /// Distance from `x` to every training point, in training order.
    pub fn distances(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if x.len() != self.dim {
            return Err(ClassifierError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let rows = self.points.chunks_exact(self.dim);
        match self.metric {
            DistanceMetric::Euclidean => Ok(rows
                .map(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .collect()),
            DistanceMetric::Cosine => {
                let qn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if qn == 0.0 {
                    return Err(ClassifierError::ZeroNormQuery);
                }
                Ok(rows
                    .zip(&self.norms)
                    .map(|(p, &pn)| {
                        let dot: f64 = p.iter().zip(x).map(|(a, b)| a * b).sum();
                        1.0 - dot / (pn * qn)
                    })
                    .collect())
            }
        }
    }

    /// Majority vote of the `k` nearest points. Distance ties go to the lower
    /// training index; vote ties to the smaller summed distance, then to the
    /// lower class code. Scores are vote fractions.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifierError> {
        let d = self.distances(x)?;
        let mut order: Vec<usize> = (0..d.len()).collect();
        let by_distance = |a: &usize, b: &usize| d[*a].total_cmp(&d[*b]).then(a.cmp(b));
        if self.k < order.len() {
            order.select_nth_unstable_by(self.k - 1, by_distance);
            order.truncate(self.k);
        }

        let mut votes = [0usize; ClassLabel::COUNT];
        let mut summed = [0.0f64; ClassLabel::COUNT];
        for &i in &order {
            let c = self.labels[i].index();
            votes[c] += 1;
            summed[c] += d[i];
        }
        let winner = (0..ClassLabel::COUNT)
            .filter(|&c| votes[c] > 0)
            .min_by(|&a, &b| {
                votes[b]
                    .cmp(&votes[a])
                    .then_with(|| summed[a].partial_cmp(&summed[b]).unwrap_or(Ordering::Equal))
                    .then(a.cmp(&b))
            })
            .expect("k >= 1");
        Ok(Prediction {
            label: ClassLabel::from_index(winner).unwrap(),
            scores: votes.iter().map(|&v| v as f64 / self.k as f64).collect(),
        })
    }
}

/// Stores the training set verbatim.
pub fn knn_fit(features: &[FeatureVector], config: KnnConfig) -> Result<KnnModel, ClassifierError> {
    let dim = check_training_set(features)?;
    if config.k == 0 || config.k > features.len() {
        return Err(ClassifierError::KTooLarge { k: config.k, n: features.len() });
    }
    let points = features.iter().flat_map(|f| f.values.iter().copied()).collect();
    let labels = features.iter().map(|f| f.label).collect();
    KnnModel::from_parts(dim, config.k, config.metric, points, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: Vec<f64>, label: ClassLabel) -> FeatureVector {
        FeatureVector::new(values, label, 1).unwrap()
    }

    fn toy() -> Vec<FeatureVector> {
        vec![
            fv(vec![0.0, 1.0], ClassLabel::Left),
            fv(vec![1.0, 0.2], ClassLabel::Right),
            fv(vec![5.0, 5.0], ClassLabel::Rest),
            fv(vec![0.1, 1.1], ClassLabel::Left),
            fv(vec![4.0, 4.5], ClassLabel::Rest),
        ]
    }

    #[test]
    fn k_larger_than_training_set() {
        assert!(matches!(
            knn_fit(&toy(), KnnConfig { k: 6, metric: DistanceMetric::Euclidean }),
            Err(ClassifierError::KTooLarge { k: 6, n: 5 })
        ));
    }

    #[test]
    fn resubstitution_with_one_neighbour_is_perfect() {
        let data = toy();
        let model = knn_fit(&data, KnnConfig::fine()).unwrap();
        for f in &data {
            assert_eq!(model.predict(&f.values).unwrap().label, f.label);
        }
    }

    #[test]
    fn cosine_rejects_zero_vectors() {
        let mut data = toy();
        data.push(fv(vec![0.0, 0.0], ClassLabel::Right));
        assert!(matches!(
            knn_fit(&data, KnnConfig { k: 1, metric: DistanceMetric::Cosine }),
            Err(ClassifierError::ZeroNormTraining(5))
        ));
        let model = knn_fit(&toy(), KnnConfig { k: 1, metric: DistanceMetric::Cosine }).unwrap();
        assert!(matches!(model.predict(&[0.0, 0.0]), Err(ClassifierError::ZeroNormQuery)));
    }

    #[test]
    fn cosine_ignores_query_scale() {
        let model = knn_fit(&toy(), KnnConfig { k: 3, metric: DistanceMetric::Cosine }).unwrap();
        for q in [[0.3, 2.0], [1.0, 0.1], [2.0, 2.1]] {
            let a = model.predict(&q).unwrap();
            let b = model.predict(&[5.0 * q[0], 5.0 * q[1]]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn vote_tie_goes_to_smaller_summed_distance() {
        let data = vec![
            fv(vec![0.0], ClassLabel::Rest),
            fv(vec![3.0], ClassLabel::Rest),
            fv(vec![-1.0], ClassLabel::Left),
            fv(vec![-2.5], ClassLabel::Left),
        ];
        let model = knn_fit(&data, KnnConfig { k: 4, metric: DistanceMetric::Euclidean }).unwrap();
        // Rest: 0.5 + 2.5 = 3.0, Left: 1.5 + 3.0 = 4.5.
        assert_eq!(model.predict(&[0.5]).unwrap().label, ClassLabel::Rest);
        // Fully symmetric: lowest code wins.
        let data = vec![fv(vec![-1.0], ClassLabel::Right), fv(vec![1.0], ClassLabel::Left)];
        let model = knn_fit(&data, KnnConfig { k: 2, metric: DistanceMetric::Euclidean }).unwrap();
        assert_eq!(model.predict(&[0.0]).unwrap().label, ClassLabel::Left);
    }

    #[test]
    fn distance_tie_goes_to_lower_index() {
        let data = vec![fv(vec![1.0], ClassLabel::Right), fv(vec![-1.0], ClassLabel::Left)];
        let model = knn_fit(&data, KnnConfig::fine()).unwrap();
        assert_eq!(model.predict(&[0.0]).unwrap().label, ClassLabel::Right);
    }
}
