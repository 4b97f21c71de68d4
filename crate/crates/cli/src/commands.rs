use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use mieeg::classifiers::{TrainedModel, MDL1_MAGIC};
use mieeg::evaluation::report::{
    emit_comparison_report, read_results_csv, write_confusion_csv, write_predictions_csv, write_results_csv,
};
use mieeg::evaluation::{run_corpus, BaselineTable, CorpusInput, EvalError, ResultRow, SubjectRun};
use mieeg::features::write_feature_csv;
use mieeg::ingest::{encode_epoch_file, generate_subject, read_epoch_file, EPB1_MAGIC};
use mieeg::preprocess::{write_frequency_response_csv, write_outlier_report_csv};
use mieeg::{generate_synthetic, ClassLabel, SyntheticSpec};

use crate::config::RunConfig;
use crate::{InspectArgs, ReportArgs, RunArgs, SynthArgs};

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_subjects: args.subjects as usize,
        n_epochs_per_subject: args.epochs as usize,
        n_channels: args.channels as usize,
        n_samples: args.samples as usize,
        sample_rate_hz: args.sample_rate,
        lateralization_strength: args.strength,
        noise_std: args.noise,
        seed: args.seed,
    };
    spec.validate()?;
    create_dir(&args.out)?;
    let mut manifest = String::from("file,subject,epochs,left,right,rest,bytes\n");
    for i in 0..spec.n_subjects {
        let ds = generate_subject(&spec, i)?;
        let name = format!("subject_{:02}.epb", ds.subject_id());
        let bytes = encode_epoch_file(&ds)?;
        write(&args.out.join(&name), &bytes)?;
        let [l, r, rest] = ds.class_counts();
        manifest.push_str(&format!("{name},{},{},{l},{r},{rest},{}\n", ds.subject_id(), ds.len(), bytes.len()));
    }
    write(&args.out.join("manifest.csv"), manifest)?;
    info!("wrote {} subjects to {}", spec.n_subjects, args.out.display());
    Ok(())
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let mut set = |k: &str, v: String| cfg.set(k, &v).with_context(|| format!("--{}", k.replace('_', "-")));
    if !args.inputs.is_empty() {
        let paths: Vec<String> = args.inputs.iter().map(|p| p.display().to_string()).collect();
        set("inputs", paths.join(","))?;
    }
    if let Some(v) = &args.model {
        set("models", v.clone())?;
    }
    if let Some(v) = args.seed {
        set("seed", v.to_string())?;
    }
    if let Some(v) = args.train_fraction {
        set("train_fraction", v.to_string())?;
    }
    if let Some(v) = &args.channels {
        set("channels", v.clone())?;
    }
    if let Some(v) = &args.outliers {
        set("outliers", v.clone())?;
    }
    if let Some(v) = args.low_hz {
        set("filter.low_hz", v.to_string())?;
    }
    if let Some(v) = args.high_hz {
        set("filter.high_hz", v.to_string())?;
    }
    if let Some(v) = args.order {
        set("filter.order", v.to_string())?;
    }
    if args.no_filter {
        set("filter", "off".into())?;
    }
    if args.no_car {
        set("car", "off".into())?;
    }
    if let Some(v) = args.window {
        set("features.window", v.to_string())?;
    }
    if let Some(v) = args.hop {
        set("features.hop", v.to_string())?;
    }
    if args.standardize {
        set("standardize", "true".into())?;
    }
    if let Some(v) = args.folds {
        set("validation_folds", v.to_string())?;
    }
    if let Some(v) = args.jobs {
        set("jobs", v.to_string())?;
    }
    if let Some(v) = args.subjects {
        set("synthetic.subjects", v.to_string())?;
    }
    if let Some(v) = args.strength {
        set("synthetic.strength", v.to_string())?;
    }
    if let Some(v) = args.synth_seed {
        set("synthetic.seed", v.to_string())?;
    }
    if args.diagnostics {
        set("diagnostics", "true".into())?;
    }
    if let Some(v) = &args.out {
        set("output_dir", v.display().to_string())?;
    }
    for o in &args.overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("--set {o}: expected KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim()).with_context(|| format!("--set {o}"))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Files are taken as given; directories contribute their `*.epb` files in
/// name order.
fn expand_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "epb"))
                .collect();
            if found.is_empty() {
                bail!("no .epb files in {}", p.display());
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn write_subject_outputs(dir: &Path, run: &SubjectRun, first_model: bool, diagnostics: bool) -> Result<()> {
    let r = &run.result;
    let stem = format!("subject_{:02}_{}", r.subject_id, r.model.name());
    run.model.save(&dir.join("models").join(format!("{stem}.mdl")))?;
    write_predictions_csv(&run.predictions, &dir.join("predictions").join(format!("{stem}.csv")))?;
    write_confusion_csv(&r.confusion, &dir.join("confusion").join(format!("{stem}.csv")))?;
    if diagnostics && first_model {
        let diag = dir.join("diagnostics");
        let subject = format!("subject_{:02}", r.subject_id);
        if let Some(report) = &run.outliers {
            write_outlier_report_csv(report, &diag.join(format!("{subject}_outliers.csv")))?;
        }
        write_feature_csv(&run.features, &diag.join(format!("{subject}_features.csv")))?;
    }
    Ok(())
}

pub fn run(args: &RunArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let inputs: Vec<CorpusInput> = if cfg.inputs.is_empty() {
        info!(
            "generating {} synthetic subjects (strength {}, seed {})",
            cfg.synthetic.n_subjects, cfg.synthetic.lateralization_strength, cfg.synthetic.seed
        );
        generate_synthetic(&cfg.synthetic)?.into_iter().map(CorpusInput::from).collect()
    } else {
        expand_inputs(&cfg.inputs)?.into_iter().map(CorpusInput::from).collect()
    };

    let dir = &cfg.output_dir;
    for sub in ["models", "predictions", "confusion"] {
        create_dir(&dir.join(sub))?;
    }
    if cfg.diagnostics {
        create_dir(&dir.join("diagnostics"))?;
    }
    write(&dir.join("config.txt"), cfg.to_text())?;

    let mut rows: Vec<ResultRow> = Vec::new();
    let mut wrote_response = false;
    for (m, &kind) in cfg.models.iter().enumerate() {
        info!("model {kind}: {} subjects on {} thread(s)", inputs.len(), cfg.jobs);
        let outcome = match run_corpus(&inputs, &cfg.pipeline(kind), cfg.jobs) {
            Ok(o) => o,
            Err(EvalError::AllSubjectsFailed(n)) => {
                warn!("model {kind}: all {n} subjects failed");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for run in outcome.runs() {
            write_subject_outputs(dir, run, m == 0, cfg.diagnostics)?;
            if cfg.diagnostics && !wrote_response {
                if let Some(c) = &run.cascade {
                    write_frequency_response_csv(c, 1025, &dir.join("diagnostics").join("frequency_response.csv"))?;
                    wrote_response = true;
                }
            }
            rows.push(ResultRow::from(&run.result));
        }
        let s = &outcome.summary;
        info!(
            "model {kind}: mean accuracy {:.4} ± {:.4} over {} subjects, {} failed",
            s.mean[0], s.std[0], s.n_subjects, s.n_failed
        );
    }
    if rows.is_empty() {
        bail!("every subject failed; see the log above");
    }
    write_results_csv(&rows, &dir.join("results.csv"))?;
    emit_comparison_report(&rows, &BaselineTable::published(), dir)?;
    info!("results in {}", dir.display());
    Ok(())
}

pub fn inspect(args: &InspectArgs) -> Result<()> {
    let path = &args.file;
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let n = bytes.len().min(4);
    if n > 0 && bytes[..n] == MDL1_MAGIC[..n] {
        let model = TrainedModel::from_bytes(&bytes).with_context(|| format!("reading {}", path.display()))?;
        println!("model: {}, classes: {}, dim: {}", model.kind(), ClassLabel::COUNT, model.dim());
        println!("bytes: {}", bytes.len());
        return Ok(());
    }
    if n < 4 || bytes[..4] != EPB1_MAGIC[..] {
        if n == 0 || bytes[..n] != EPB1_MAGIC[..n] {
            bail!("{}: not an EPB1 or MDL1 file (bad magic {:?})", path.display(), &bytes[..n]);
        }
    }
    let ds = read_epoch_file(path).with_context(|| format!("reading {}", path.display()))?;
    let [l, r, rest] = ds.class_counts();
    println!(
        "epochs: {}, channels: {}, samples: {}",
        ds.len(),
        ds.n_channels().unwrap_or(0),
        ds.n_samples().unwrap_or(0)
    );
    println!("subject: {}", ds.subject_id());
    println!("sample_rate_hz: {}", ds.sample_rate_hz().unwrap_or(0.0));
    println!("channel_names: {}", ds.channel_names().unwrap_or(&[]).join(","));
    println!("classes: left {l}, right {r}, rest {rest}");
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let rows = read_results_csv(&args.results)?;
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args.results.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    create_dir(&dir)?;
    let baselines = if args.no_baselines { BaselineTable::empty() } else { BaselineTable::published() };
    emit_comparison_report(&rows, &baselines, &dir)?;
    info!("report written to {}", dir.display());
    Ok(())
}
