//! Flat `key = value` run configuration.
//!
//! A config file sets any subset of keys; command-line flags are applied on
//! top. The resolved configuration is written back in the same format, keys
//! sorted, so a run can be repeated from its own `config.txt`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use mieeg::classifiers::{DistanceMetric, KnnConfig, ModelKind, ModelSpec, NnConfig, QdaConfig};
use mieeg::evaluation::PipelineConfig;
use mieeg::features::{FeatureExtractor, FeatureParams};
use mieeg::ingest::ChannelSelection;
use mieeg::preprocess::{FilterSpec, OutlierMode, PreprocessConfig};
use mieeg::SyntheticSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// EPB1 files or directories of them; empty means a synthetic corpus.
    pub inputs: Vec<PathBuf>,
    pub synthetic: SyntheticSpec,
    /// `None` keeps every channel of the input.
    pub channels: Option<ChannelSelection>,
    pub outliers: Option<OutlierMode>,
    pub filter: Option<FilterSpec>,
    pub car: bool,
    pub features: FeatureParams,
    pub models: Vec<ModelKind>,
    pub cos_knn_k: usize,
    pub qda_regularization: Option<f64>,
    pub nn: NnConfig,
    pub train_fraction: f64,
    pub seed: u64,
    pub standardize: bool,
    pub validation_folds: usize,
    pub jobs: usize,
    pub output_dir: PathBuf,
    pub diagnostics: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pipeline = PipelineConfig::default();
        Self {
            inputs: Vec::new(),
            synthetic: SyntheticSpec::default(),
            channels: pipeline.preprocess.selection,
            outliers: pipeline.preprocess.outliers,
            filter: pipeline.preprocess.filter,
            car: pipeline.preprocess.car,
            features: pipeline.features,
            models: vec![ModelKind::FineKnn],
            cos_knn_k: KnnConfig::cosine().k,
            qda_regularization: QdaConfig::default().regularization,
            nn: NnConfig::default(),
            train_fraction: pipeline.train_fraction,
            seed: pipeline.seed,
            standardize: pipeline.standardize,
            validation_folds: pipeline.validation_folds,
            jobs: 1,
            output_dir: PathBuf::from("out"),
            diagnostics: false,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => bail!("expected a boolean, got {v:?}"),
    }
}

fn list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow::anyhow!("{key}: {e}"))
}

/// `key = value` pairs; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key = value", i + 1))?;
        out.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text).with_context(|| format!("in config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    fn filter_mut(&mut self) -> &mut FilterSpec {
        self.filter.get_or_insert_with(FilterSpec::default)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "inputs" => self.inputs = list(v).into_iter().map(PathBuf::from).collect(),
            "synthetic.subjects" => self.synthetic.n_subjects = num(key, v)?,
            "synthetic.epochs" => self.synthetic.n_epochs_per_subject = num(key, v)?,
            "synthetic.channels" => self.synthetic.n_channels = num(key, v)?,
            "synthetic.samples" => self.synthetic.n_samples = num(key, v)?,
            "synthetic.sample_rate_hz" => self.synthetic.sample_rate_hz = num(key, v)?,
            "synthetic.strength" => self.synthetic.lateralization_strength = num(key, v)?,
            "synthetic.noise" => self.synthetic.noise_std = num(key, v)?,
            "synthetic.seed" => self.synthetic.seed = num(key, v)?,
            "channels" => {
                self.channels = match v {
                    "all" => None,
                    _ => Some(ChannelSelection::new(&list(v))?),
                }
            }
            "outliers" => {
                self.outliers = match v {
                    "epoch-mean" => Some(OutlierMode::EpochMean),
                    "per-channel" => Some(OutlierMode::PerChannel),
                    "off" => None,
                    _ => bail!("outliers: expected epoch-mean, per-channel or off, got {v:?}"),
                }
            }
            "filter" => {
                if parse_bool(v)? {
                    self.filter_mut();
                } else {
                    self.filter = None;
                }
            }
            "filter.low_hz" => self.filter_mut().low_hz = num(key, v)?,
            "filter.high_hz" => self.filter_mut().high_hz = num(key, v)?,
            "filter.order" => self.filter_mut().order = num(key, v)?,
            "car" => self.car = parse_bool(v)?,
            "features.window" => self.features.window = num(key, v)?,
            "features.hop" => self.features.hop = num(key, v)?,
            "models" => {
                self.models = list(v).into_iter().map(str::parse).collect::<Result<_, _>>()?;
            }
            "cos_knn.k" => self.cos_knn_k = num(key, v)?,
            "qda.regularization" => {
                self.qda_regularization = if v == "none" { None } else { Some(num(key, v)?) }
            }
            "nn.hidden" => self.nn.hidden = num(key, v)?,
            "nn.learning_rate" => self.nn.learning_rate = num(key, v)?,
            "nn.max_epochs" => self.nn.max_epochs = num(key, v)?,
            "nn.batch_size" => self.nn.batch_size = if v == "full" { None } else { Some(num(key, v)?) },
            "nn.tolerance" => self.nn.tolerance = num(key, v)?,
            "nn.standardize_inputs" => self.nn.standardize_inputs = parse_bool(v)?,
            "nn.seed" => self.nn.seed = num(key, v)?,
            "train_fraction" => self.train_fraction = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "standardize" => self.standardize = parse_bool(v)?,
            "validation_folds" => self.validation_folds = num(key, v)?,
            "jobs" => self.jobs = num(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "diagnostics" => self.diagnostics = parse_bool(v)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let s = &self.synthetic;
        let mut m = BTreeMap::new();
        let paths: Vec<String> = self.inputs.iter().map(|p| p.display().to_string()).collect();
        m.insert("inputs", paths.join(","));
        m.insert("synthetic.subjects", s.n_subjects.to_string());
        m.insert("synthetic.epochs", s.n_epochs_per_subject.to_string());
        m.insert("synthetic.channels", s.n_channels.to_string());
        m.insert("synthetic.samples", s.n_samples.to_string());
        m.insert("synthetic.sample_rate_hz", s.sample_rate_hz.to_string());
        m.insert("synthetic.strength", s.lateralization_strength.to_string());
        m.insert("synthetic.noise", s.noise_std.to_string());
        m.insert("synthetic.seed", s.seed.to_string());
        m.insert(
            "channels",
            self.channels.as_ref().map_or_else(|| "all".to_owned(), |c| c.names().join(",")),
        );
        m.insert(
            "outliers",
            match self.outliers {
                Some(OutlierMode::EpochMean) => "epoch-mean",
                Some(OutlierMode::PerChannel) => "per-channel",
                None => "off",
            }
            .to_owned(),
        );
        m.insert("filter", self.filter.is_some().to_string());
        if let Some(f) = &self.filter {
            m.insert("filter.low_hz", f.low_hz.to_string());
            m.insert("filter.high_hz", f.high_hz.to_string());
            m.insert("filter.order", f.order.to_string());
        }
        m.insert("car", self.car.to_string());
        m.insert("features.window", self.features.window.to_string());
        m.insert("features.hop", self.features.hop.to_string());
        m.insert("models", self.models.iter().map(|k| k.name()).collect::<Vec<_>>().join(","));
        m.insert("cos_knn.k", self.cos_knn_k.to_string());
        m.insert(
            "qda.regularization",
            self.qda_regularization.map_or_else(|| "none".to_owned(), |v| v.to_string()),
        );
        m.insert("nn.hidden", self.nn.hidden.to_string());
        m.insert("nn.learning_rate", self.nn.learning_rate.to_string());
        m.insert("nn.max_epochs", self.nn.max_epochs.to_string());
        m.insert(
            "nn.batch_size",
            self.nn.batch_size.map_or_else(|| "full".to_owned(), |b| b.to_string()),
        );
        m.insert("nn.tolerance", self.nn.tolerance.to_string());
        m.insert("nn.standardize_inputs", self.nn.standardize_inputs.to_string());
        m.insert("nn.seed", self.nn.seed.to_string());
        m.insert("train_fraction", self.train_fraction.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("standardize", self.standardize.to_string());
        m.insert("validation_folds", self.validation_folds.to_string());
        m.insert("jobs", self.jobs.to_string());
        m.insert("output_dir", self.output_dir.display().to_string());
        m.insert("diagnostics", self.diagnostics.to_string());
        m
    }

    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn model_spec(&self, kind: ModelKind) -> ModelSpec {
        match kind {
            ModelKind::Qda => ModelSpec::Qda(QdaConfig {
                regularization: self.qda_regularization,
                ..QdaConfig::default()
            }),
            ModelKind::FineKnn => ModelSpec::Knn(KnnConfig::fine()),
            ModelKind::CosKnn => ModelSpec::Knn(KnnConfig {
                k: self.cos_knn_k,
                metric: DistanceMetric::Cosine,
            }),
            ModelKind::WideNn => ModelSpec::WideNn(self.nn.clone()),
        }
    }

    pub fn pipeline(&self, kind: ModelKind) -> PipelineConfig {
        PipelineConfig {
            preprocess: PreprocessConfig {
                selection: self.channels.clone(),
                outliers: self.outliers,
                filter: self.filter.clone(),
                car: self.car,
            },
            features: self.features,
            model: self.model_spec(kind),
            train_fraction: self.train_fraction,
            seed: self.seed,
            standardize: self.standardize,
            validation_folds: self.validation_folds,
        }
    }

    /// Checks everything that can be checked without reading the data.
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.models.is_empty(), "no model selected");
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        ensure!(seen.len() == self.models.len(), "a model is listed twice");
        ensure!(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            "train_fraction must lie strictly between 0 and 1"
        );
        ensure!(self.jobs >= 1, "jobs must be at least 1");
        ensure!(self.cos_knn_k >= 1, "cos_knn.k must be at least 1");
        ensure!(self.validation_folds != 1, "validation_folds must be 0 (off) or at least 2");
        ensure!(self.nn.hidden >= 1, "nn.hidden must be at least 1");
        ensure!(
            self.nn.learning_rate > 0.0 && self.nn.learning_rate.is_finite(),
            "nn.learning_rate must be positive"
        );
        ensure!(self.nn.batch_size != Some(0), "nn.batch_size must be positive");
        if let Some(r) = self.qda_regularization {
            ensure!(r.is_finite() && r >= 0.0, "qda.regularization must be non-negative");
        }
        if let Some(f) = &self.filter {
            f.validate()?;
        }
        FeatureExtractor::new(self.features)?;
        if self.inputs.is_empty() {
            self.synthetic.validate()?;
        }
        for p in &self.inputs {
            ensure!(p.exists(), "input {} does not exist", p.display());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "# comment\nmodels = qda, cos-knn\nseed = 9\nqda.regularization = none\nnn.batch_size = 16\nfilter.order = 12\n",
        )
        .unwrap();
        assert_eq!(cfg.models, vec![ModelKind::Qda, ModelKind::CosKnn]);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);

        let mut off = RunConfig::default();
        off.apply_text("filter = off\nchannels = all\noutliers = off\n").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&off.to_text()).unwrap();
        assert_eq!(back, off);
    }

    #[test]
    fn keys_are_sorted() {
        let text = RunConfig::default().to_text();
        let keys: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn bad_values_are_reported() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("seed", "x").is_err());
        assert!(cfg.set("colour", "blue").is_err());
        assert!(cfg.set("models", "svm").is_err());
        assert!(cfg.set("channels", "C3,C4").is_err());
        assert!(parse_pairs("no equals sign").is_err());
        cfg.train_fraction = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }
}
