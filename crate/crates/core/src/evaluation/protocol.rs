//! Per-subject train/test protocol and corpus aggregation.

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::metrics::{confusion, metrics_from_confusion, ConfusionMatrix, MetricSet};
use super::EvalError;
use crate::classifiers::{ModelKind, ModelSpec, Prediction, TrainedModel};
use crate::features::{FeatureExtractor, FeatureParams, FeatureVector, Standardizer};
use crate::ingest::read_epoch_file;
use crate::model::{stratified_split, ClassLabel, SubjectDataset};
use crate::preprocess::{preprocess_dataset, BiquadCascade, OutlierReport, PreprocessConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub features: FeatureParams,
    pub model: ModelSpec,
    pub train_fraction: f64,
    pub seed: u64,
    /// Z-score features with training-set statistics before fitting.
    pub standardize: bool,
    /// Folds of the cross-validation on the training portion; 0 skips it.
    pub validation_folds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            features: FeatureParams::default(),
            model: ModelKind::FineKnn.default_spec(),
            train_fraction: 0.8,
            seed: 0,
            standardize: false,
            validation_folds: 5,
        }
    }
}

impl PipelineConfig {
    pub fn with_model(&self, model: impl Into<ModelSpec>) -> Self {
        Self { model: model.into(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Preprocess,
    Features,
    Split,
    Validation,
    Fit,
    Predict,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Load => "load",
            Stage::Preprocess => "preprocess",
            Stage::Features => "features",
            Stage::Split => "split",
            Stage::Validation => "validation",
            Stage::Fit => "fit",
            Stage::Predict => "predict",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectResult {
    pub subject_id: u16,
    pub model: ModelKind,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    /// Mean accuracy of the cross-validation on the training portion.
    pub validation_accuracy: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_rejected: usize,
    /// Wall-clock seconds spent in `fit` alone.
    pub fit_seconds: f64,
    pub model_bytes: usize,
}

impl SubjectResult {
    /// Equality with the wall-clock timing ignored.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self { fit_seconds: 0.0, ..self.clone() } == Self { fit_seconds: 0.0, ..other.clone() }
    }
}

/// One test-set prediction. `epoch_index` refers to the subject's input
/// epochs, before outlier rejection.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPrediction {
    pub epoch_index: usize,
    pub truth: ClassLabel,
    pub prediction: Prediction,
}

/// Everything produced by one subject's run.
#[derive(Debug, Clone)]
pub struct SubjectRun {
    pub result: SubjectResult,
    pub model: TrainedModel,
    pub predictions: Vec<EpochPrediction>,
    pub outliers: Option<OutlierReport>,
    pub cascade: Option<BiquadCascade>,
    pub features: Vec<FeatureVector>,
}

fn stage<E: Into<crate::Error>>(subject: u16, stage: Stage) -> impl FnOnce(E) -> EvalError {
    move |e| EvalError::Stage {
        subject: subject.to_string(),
        stage,
        source: Box::new(e.into()),
    }
}

/// Preprocess, extract features, split, fit and score one subject.
pub fn run_subject(dataset: &SubjectDataset, config: &PipelineConfig) -> Result<SubjectRun, EvalError> {
    let id = dataset.subject_id();
    let pre = preprocess_dataset(dataset, &config.preprocess).map_err(stage(id, Stage::Preprocess))?;
    let kept: Vec<usize> = match &pre.outliers {
        Some(r) => r.kept.clone(),
        None => (0..dataset.len()).collect(),
    };
    let extractor = FeatureExtractor::new(config.features).map_err(stage(id, Stage::Features))?;
    let features = extractor.extract_all(pre.dataset.epochs()).map_err(stage(id, Stage::Features))?;

    let split = stratified_split(&pre.dataset, config.train_fraction, config.seed).map_err(stage(id, Stage::Split))?;
    let mut train: Vec<FeatureVector> = split.train.iter().map(|&i| features[i].clone()).collect();
    let mut test: Vec<FeatureVector> = split.test.iter().map(|&i| features[i].clone()).collect();
    if config.standardize {
        let s = Standardizer::fit(&train);
        train = s.apply_all(&train);
        test = s.apply_all(&test);
    }

    let validation_accuracy = cross_validate(&train, &config.model, config.validation_folds, config.seed)
        .map_err(stage(id, Stage::Validation))?;

    let start = Instant::now();
    let model = config.model.fit(&train).map_err(stage(id, Stage::Fit))?;
    let fit_seconds = start.elapsed().as_secs_f64();

    let scored = model.predict_all(&test).map_err(stage(id, Stage::Predict))?;
    let truth: Vec<ClassLabel> = test.iter().map(|f| f.label).collect();
    let predicted: Vec<ClassLabel> = scored.iter().map(|p| p.label).collect();
    let cm = confusion(&truth, &predicted)?;
    let predictions = split
        .test
        .iter()
        .zip(scored)
        .map(|(&i, prediction)| EpochPrediction {
            epoch_index: kept[i],
            truth: features[i].label,
            prediction,
        })
        .collect();

    let result = SubjectResult {
        subject_id: id,
        model: model.kind(),
        metrics: metrics_from_confusion(&cm),
        confusion: cm,
        validation_accuracy,
        n_train: split.train.len(),
        n_test: split.test.len(),
        n_rejected: dataset.len() - kept.len(),
        fit_seconds,
        model_bytes: model.to_bytes().len(),
    };
    Ok(SubjectRun {
        result,
        model,
        predictions,
        outliers: pre.outliers,
        cascade: pre.cascade,
        features,
    })
}

/// Stratified `folds`-fold cross-validation accuracy. `None` when disabled
/// or when some class has fewer epochs than folds.
pub fn cross_validate(
    features: &[FeatureVector],
    spec: &ModelSpec,
    folds: usize,
    seed: u64,
) -> Result<Option<f64>, crate::classifiers::ClassifierError> {
    if folds < 2 {
        return Ok(None);
    }
    let mut fold_of = vec![0usize; features.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f01d);
    for label in ClassLabel::ALL {
        let mut idx: Vec<usize> = (0..features.len()).filter(|&i| features[i].label == label).collect();
        if !idx.is_empty() && idx.len() < folds {
            return Ok(None);
        }
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = pos % folds;
        }
    }
    let mut correct = 0usize;
    for fold in 0..folds {
        let train: Vec<FeatureVector> = (0..features.len())
            .filter(|&i| fold_of[i] != fold)
            .map(|i| features[i].clone())
            .collect();
        let model = spec.fit(&train)?;
        for (_, f) in features.iter().enumerate().filter(|(i, _)| fold_of[*i] == fold) {
            if model.predict(&f.values)?.label == f.label {
                correct += 1;
            }
        }
    }
    Ok(Some(correct as f64 / features.len() as f64))
}

/// A subject to evaluate: already in memory, or an EPB1 file read inside
/// the worker so a bad file only fails its own subject.
#[derive(Debug, Clone)]
pub enum CorpusInput {
    Dataset(SubjectDataset),
    Path(PathBuf),
}

impl CorpusInput {
    pub fn describe(&self) -> String {
        match self {
            CorpusInput::Dataset(d) => format!("subject {}", d.subject_id()),
            CorpusInput::Path(p) => p.display().to_string(),
        }
    }
}

impl From<SubjectDataset> for CorpusInput {
    fn from(d: SubjectDataset) -> Self {
        CorpusInput::Dataset(d)
    }
}

impl From<PathBuf> for CorpusInput {
    fn from(p: PathBuf) -> Self {
        CorpusInput::Path(p)
    }
}

#[derive(Debug)]
pub struct SubjectFailure {
    pub input: String,
    pub error: EvalError,
}

/// Mean and population standard deviation of each metric across subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub n_subjects: usize,
    pub n_failed: usize,
    /// accuracy, recall, specificity, f1
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl CorpusSummary {
    pub fn from_results(results: &[SubjectResult], n_failed: usize) -> Self {
        let n = results.len();
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        if n > 0 {
            for m in 0..4 {
                let vals: Vec<f64> = results.iter().map(|r| r.metrics.values()[m]).collect();
                mean[m] = vals.iter().sum::<f64>() / n as f64;
                std[m] = (vals.iter().map(|v| (v - mean[m]).powi(2)).sum::<f64>() / n as f64).sqrt();
            }
        }
        Self { n_subjects: n, n_failed, mean, std }
    }
}

#[derive(Debug)]
pub struct CorpusOutcome {
    /// Input order.
    pub outcomes: Vec<Result<SubjectRun, SubjectFailure>>,
    pub summary: CorpusSummary,
}

impl CorpusOutcome {
    pub fn runs(&self) -> impl Iterator<Item = &SubjectRun> {
        self.outcomes.iter().filter_map(|o| o.as_ref().ok())
    }

    pub fn results(&self) -> Vec<SubjectResult> {
        self.runs().map(|r| r.result.clone()).collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &SubjectFailure> {
        self.outcomes.iter().filter_map(|o| o.as_ref().err())
    }
}

fn run_input(input: &CorpusInput, config: &PipelineConfig) -> Result<SubjectRun, SubjectFailure> {
    let fail = |error| SubjectFailure { input: input.describe(), error };
    match input {
        CorpusInput::Dataset(d) => run_subject(d, config).map_err(fail),
        CorpusInput::Path(p) => {
            let d = read_epoch_file(p).map_err(|e| {
                fail(EvalError::Stage {
                    subject: p.display().to_string(),
                    stage: Stage::Load,
                    source: Box::new(e.into()),
                })
            })?;
            run_subject(&d, config).map_err(fail)
        }
    }
}

/// Runs every subject on a pool of `jobs` threads. Failures are recorded
/// per subject; the call fails only if no subject succeeds.
pub fn run_corpus(inputs: &[CorpusInput], config: &PipelineConfig, jobs: usize) -> Result<CorpusOutcome, EvalError> {
    if inputs.is_empty() {
        return Err(EvalError::Empty);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EvalError::Config(e.to_string()))?;
    let outcomes: Vec<Result<SubjectRun, SubjectFailure>> =
        pool.install(|| inputs.par_iter().map(|i| run_input(i, config)).collect());
    let results: Vec<SubjectResult> = outcomes.iter().filter_map(|o| o.as_ref().ok()).map(|r| r.result.clone()).collect();
    let n_failed = outcomes.len() - results.len();
    for f in outcomes.iter().filter_map(|o| o.as_ref().err()) {
        log::warn!("{}: {}", f.input, f.error);
    }
    if results.is_empty() {
        return Err(EvalError::AllSubjectsFailed(n_failed));
    }
    let summary = CorpusSummary::from_results(&results, n_failed);
    Ok(CorpusOutcome { outcomes, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SyntheticSpec};

    fn small(strength: f64, subjects: usize) -> Vec<SubjectDataset> {
        generate_synthetic(&SyntheticSpec {
            n_subjects: subjects,
            n_epochs_per_subject: 30,
            lateralization_strength: strength,
            seed: 3,
            ..SyntheticSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn lateralised_subject_is_separable() {
        let ds = &small(20.0, 1)[0];
        let run = run_subject(ds, &PipelineConfig::default()).unwrap();
        let r = &run.result;
        assert_eq!(r.n_train + r.n_test + r.n_rejected, 30);
        assert_eq!(r.confusion.total() as usize, r.n_test);
        assert!(r.metrics.accuracy >= 0.99, "{:?}", r.metrics);
        assert_eq!(r.model_bytes, run.model.to_bytes().len());
        assert_eq!(run.predictions.len(), r.n_test);
        assert!(run.predictions.iter().all(|p| p.truth == ds.epochs()[p.epoch_index].label()));
    }

    #[test]
    fn metrics_recompute_from_confusion() {
        let ds = &small(2.0, 1)[0];
        let r = run_subject(ds, &PipelineConfig::default()).unwrap().result;
        assert_eq!(metrics_from_confusion(&r.confusion), r.metrics);
    }

    #[test]
    fn repeated_runs_agree() {
        let ds = &small(1.0, 1)[0];
        for kind in ModelKind::ALL {
            let cfg = PipelineConfig::default().with_model(kind);
            let a = run_subject(ds, &cfg).unwrap();
            let b = run_subject(ds, &cfg).unwrap();
            assert!(a.result.same_outcome(&b.result), "{kind}");
            assert_eq!(a.model, b.model);
            assert_eq!(a.predictions, b.predictions);
        }
    }

    #[test]
    fn stage_errors_name_subject_and_stage() {
        let ds = &small(1.0, 1)[0];
        let cfg = PipelineConfig {
            features: FeatureParams { window: 4096, hop: 128 },
            ..PipelineConfig::default()
        };
        let err = run_subject(ds, &cfg).unwrap_err();
        assert!(matches!(err, EvalError::Stage { stage: Stage::Features, .. }));
        assert!(err.to_string().contains("subject 1"), "{err}");
    }

    #[test]
    fn single_subject_summary() {
        let data = small(20.0, 1);
        let inputs: Vec<CorpusInput> = data.into_iter().map(Into::into).collect();
        let out = run_corpus(&inputs, &PipelineConfig::default(), 1).unwrap();
        let r = &out.results()[0];
        assert_eq!(out.summary.mean, r.metrics.values());
        assert_eq!(out.summary.std, [0.0; 4]);
    }

    #[test]
    fn failures_are_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let mut inputs: Vec<CorpusInput> = small(20.0, 4).into_iter().map(Into::into).collect();
        let bad = dir.path().join("broken.epb");
        std::fs::write(&bad, b"EPB1\x01").unwrap();
        inputs.insert(2, CorpusInput::Path(bad));
        let out = run_corpus(&inputs, &PipelineConfig::default(), 2).unwrap();
        assert_eq!(out.summary.n_subjects, 4);
        assert_eq!(out.summary.n_failed, 1);
        assert!(out.outcomes[2].is_err());
        let ids: Vec<u16> = out.runs().map(|r| r.result.subject_id).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);

        let missing = vec![CorpusInput::Path(dir.path().join("absent.epb"))];
        assert!(matches!(
            run_corpus(&missing, &PipelineConfig::default(), 1),
            Err(EvalError::AllSubjectsFailed(1))
        ));
    }

    #[test]
    fn summary_mean_is_arithmetic_mean() {
        let inputs: Vec<CorpusInput> = small(0.5, 3).into_iter().map(Into::into).collect();
        let out = run_corpus(&inputs, &PipelineConfig::default(), 1).unwrap();
        let results = out.results();
        let acc: f64 = results.iter().map(|r| r.metrics.accuracy).sum::<f64>() / 3.0;
        assert!((out.summary.mean[0] - acc).abs() <= 1e-12);
    }
}
