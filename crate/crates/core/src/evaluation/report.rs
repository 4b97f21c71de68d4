//! Results table, comparison report and per-subject CSV files.
//!
//! The comparison report is rendered from [`ResultRow`]s only, so it can be
//! rebuilt byte for byte from a saved `results.csv`.

use std::fmt::Write as _;
use std::path::Path;

use super::metrics::ConfusionMatrix;
use super::protocol::{EpochPrediction, SubjectResult};
use super::EvalError;
use crate::model::ClassLabel;

pub const RESULTS_HEADER: &str =
    "subject,model,accuracy,recall,specificity,f1,fit_seconds,model_bytes,validation_accuracy,undefined_classes";

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub subject: u16,
    pub model: String,
    pub accuracy: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub fit_seconds: f64,
    pub model_bytes: usize,
    pub validation_accuracy: Option<f64>,
    /// Class names whose metrics hit a 0/0 ratio.
    pub undefined_classes: Vec<String>,
}

impl From<&SubjectResult> for ResultRow {
    fn from(r: &SubjectResult) -> Self {
        Self {
            subject: r.subject_id,
            model: r.model.name().to_owned(),
            accuracy: r.metrics.accuracy,
            recall: r.metrics.recall,
            specificity: r.metrics.specificity,
            f1: r.metrics.f1,
            fit_seconds: r.fit_seconds,
            model_bytes: r.model_bytes,
            validation_accuracy: r.validation_accuracy,
            undefined_classes: r
                .metrics
                .flagged_classes
                .iter()
                .map(|&c| ClassLabel::from_index(c).map_or_else(|| c.to_string(), |l| l.name().to_owned()))
                .collect(),
        }
    }
}

impl ResultRow {
    pub fn metric_values(&self) -> [f64; 4] {
        [self.accuracy, self.recall, self.specificity, self.f1]
    }
}

/// A published comparison row; missing metrics are left blank.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub label: String,
    pub accuracy: f64,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineTable {
    pub rows: Vec<BaselineRow>,
}

impl BaselineTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Accuracies reported by earlier work on the same 52-subject dataset,
    /// and the published reference figures for this pipeline.
    pub fn published() -> Self {
        let row = |label: &str, accuracy, rest: Option<[f64; 3]>| BaselineRow {
            label: label.to_owned(),
            accuracy,
            recall: rest.map(|r| r[0]),
            specificity: rest.map(|r| r[1]),
            f1: rest.map(|r| r[2]),
        };
        Self {
            rows: vec![
                row("Cho et al.", 0.6746, None),
                row("Kumar et al.", 0.6724, None),
                row("Sadiq et al. (2021)", 0.8502, None),
                row("Sadiq et al. (2022)", 0.8769, Some([0.8762, 0.8775, 0.8770])),
                row("Reference (published)", 0.995, Some([0.9986, 0.9983, 0.9984])),
            ],
        }
    }
}

/// Four decimals with trailing zeros trimmed, keeping one digit after the
/// point: `0.99500 → 0.995`, `1 → 1.0`.
pub fn format_metric(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_owned()
    }
}

fn opt_metric(v: Option<f64>) -> String {
    v.map(format_metric).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), EvalError> {
    std::fs::write(path, text).map_err(io_err(path))
}

/// Floats are written in shortest round-trip form so parsing restores them
/// exactly.
pub fn format_results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.subject,
            r.model,
            r.accuracy,
            r.recall,
            r.specificity,
            r.f1,
            r.fit_seconds,
            r.model_bytes,
            r.validation_accuracy.map(|v| v.to_string()).unwrap_or_default(),
            r.undefined_classes.join(";"),
        );
    }
    out
}

pub fn write_results_csv(rows: &[ResultRow], path: &Path) -> Result<(), EvalError> {
    write_text(path, &format_results_csv(rows))
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>, EvalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RESULTS_HEADER => {}
        _ => {
            return Err(EvalError::BadResults { line: 1, reason: "missing or unexpected header".into() });
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| EvalError::BadResults { line: i + 1, reason };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad(format!("expected 10 fields, found {}", f.len())));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|e| bad(format!("field {}: {e}", k + 1)));
        rows.push(ResultRow {
            subject: f[0].parse().map_err(|e| bad(format!("subject: {e}")))?,
            model: f[1].to_owned(),
            accuracy: num(2)?,
            recall: num(3)?,
            specificity: num(4)?,
            f1: num(5)?,
            fit_seconds: num(6)?,
            model_bytes: f[7].parse().map_err(|e| bad(format!("model_bytes: {e}")))?,
            validation_accuracy: if f[8].is_empty() { None } else { Some(num(8)?) },
            undefined_classes: f[9].split(';').filter(|s| !s.is_empty()).map(str::to_owned).collect(),
        });
    }
    Ok(rows)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>, EvalError> {
    parse_results_csv(&std::fs::read_to_string(path).map_err(io_err(path))?)
}

/// Distinct model names in order of first appearance.
fn models(rows: &[ResultRow]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for r in rows {
        if !out.contains(&r.model.as_str()) {
            out.push(&r.model);
        }
    }
    out
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `(label, [accuracy, recall, specificity, f1])` corpus means per model.
fn our_rows(rows: &[ResultRow]) -> Vec<(String, [f64; 4])> {
    let names = models(rows);
    names
        .iter()
        .map(|&m| {
            let mine: Vec<&ResultRow> = rows.iter().filter(|r| r.model == m).collect();
            let mut means = [0.0; 4];
            for (k, slot) in means.iter_mut().enumerate() {
                let vals: Vec<f64> = mine.iter().map(|r| r.metric_values()[k]).collect();
                *slot = mean_std(&vals).0;
            }
            let label = if names.len() == 1 { "Ours".to_owned() } else { format!("Ours ({m})") };
            (label, means)
        })
        .collect()
}

fn table_rows(rows: &[ResultRow], baselines: &BaselineTable) -> Vec<[String; 5]> {
    let mut out: Vec<[String; 5]> = baselines
        .rows
        .iter()
        .map(|b| {
            [
                b.label.clone(),
                format_metric(b.accuracy),
                opt_metric(b.recall),
                opt_metric(b.specificity),
                opt_metric(b.f1),
            ]
        })
        .collect();
    for (label, m) in our_rows(rows) {
        out.push([label, format_metric(m[0]), format_metric(m[1]), format_metric(m[2]), format_metric(m[3])]);
    }
    out
}

/// `approach,accuracy,recall,specificity,f1`: baselines first, then one
/// row per model with the corpus means.
pub fn render_comparison_csv(rows: &[ResultRow], baselines: &BaselineTable) -> String {
    let mut out = String::from("approach,accuracy,recall,specificity,f1\n");
    for r in table_rows(rows, baselines) {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// One row per subject, one accuracy column per model.
pub fn render_per_subject_csv(rows: &[ResultRow]) -> String {
    let names = models(rows);
    let mut subjects: Vec<u16> = rows.iter().map(|r| r.subject).collect();
    subjects.sort_unstable();
    subjects.dedup();
    let mut out = format!("subject,{}\n", names.join(","));
    for s in subjects {
        let cells: Vec<String> = names
            .iter()
            .map(|&m| {
                rows.iter()
                    .find(|r| r.subject == s && r.model == m)
                    .map(|r| r.accuracy.to_string())
                    .unwrap_or_default()
            })
            .collect();
        let _ = writeln!(out, "{s},{}", cells.join(","));
    }
    out
}

pub fn render_comparison_markdown(rows: &[ResultRow], baselines: &BaselineTable) -> String {
    let mut out = String::from("# Comparison\n\n");
    out.push_str("| Approach | Accuracy | Recall | Specificity | F1 |\n");
    out.push_str("| --- | --- | --- | --- | --- |\n");
    for r in table_rows(rows, baselines) {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }

    let names = models(rows);
    out.push_str("\n## Corpus summary\n\n");
    out.push_str("| Model | Subjects | Accuracy | Recall | Specificity | F1 |\n");
    out.push_str("| --- | --- | --- | --- | --- | --- |\n");
    for &m in &names {
        let mine: Vec<&ResultRow> = rows.iter().filter(|r| r.model == m).collect();
        let cells: Vec<String> = (0..4)
            .map(|k| {
                let vals: Vec<f64> = mine.iter().map(|r| r.metric_values()[k]).collect();
                let (mean, std) = mean_std(&vals);
                format!("{} ± {}", format_metric(mean), format_metric(std))
            })
            .collect();
        let _ = writeln!(out, "| {m} | {} | {} |", mine.len(), cells.join(" | "));
    }

    out.push_str("\n## Per-subject accuracy\n\n");
    let _ = writeln!(out, "| Subject | {} |", names.join(" | "));
    let _ = writeln!(out, "| --- |{}", " --- |".repeat(names.len()));
    for line in render_per_subject_csv(rows).lines().skip(1) {
        let cells: Vec<String> = line
            .split(',')
            .enumerate()
            .map(|(i, c)| match (i, c.parse::<f64>()) {
                (0, _) | (_, Err(_)) => c.to_owned(),
                (_, Ok(v)) => format_metric(v),
            })
            .collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }

    let flagged: Vec<&ResultRow> = rows.iter().filter(|r| !r.undefined_classes.is_empty()).collect();
    if !flagged.is_empty() {
        out.push_str("\n## Undefined ratios\n\nThese metrics involved a 0/0 ratio, counted as 0:\n\n");
        for r in flagged {
            let _ = writeln!(out, "- subject {} ({}): {}", r.subject, r.model, r.undefined_classes.join(", "));
        }
    }
    out
}

/// Writes `comparison.md`, `comparison.csv` and `per_subject_accuracy.csv`
/// into `dir`.
pub fn emit_comparison_report(rows: &[ResultRow], baselines: &BaselineTable, dir: &Path) -> Result<(), EvalError> {
    if rows.is_empty() {
        return Err(EvalError::Empty);
    }
    write_text(&dir.join("comparison.md"), &render_comparison_markdown(rows, baselines))?;
    write_text(&dir.join("comparison.csv"), &render_comparison_csv(rows, baselines))?;
    write_text(&dir.join("per_subject_accuracy.csv"), &render_per_subject_csv(rows))
}

/// Rows are true classes, columns predicted classes.
pub fn format_confusion_csv(cm: &ConfusionMatrix) -> String {
    let name = |i: usize| ClassLabel::from_index(i).map_or_else(|| i.to_string(), |l| l.name().to_owned());
    let k = cm.n_classes();
    let mut out = format!("true\\predicted,{}\n", (0..k).map(name).collect::<Vec<_>>().join(","));
    for i in 0..k {
        let cells: Vec<String> = (0..k).map(|j| cm.get(i, j).to_string()).collect();
        let _ = writeln!(out, "{},{}", name(i), cells.join(","));
    }
    out
}

pub fn write_confusion_csv(cm: &ConfusionMatrix, path: &Path) -> Result<(), EvalError> {
    write_text(path, &format_confusion_csv(cm))
}

/// `epoch_index,true_label,predicted_label,score_0..score_{K-1}`, labels as
/// class codes.
pub fn format_predictions_csv(predictions: &[EpochPrediction]) -> String {
    let k = predictions.first().map_or(ClassLabel::COUNT, |p| p.prediction.scores.len());
    let scores: Vec<String> = (0..k).map(|i| format!("score_{i}")).collect();
    let mut out = format!("epoch_index,true_label,predicted_label,{}\n", scores.join(","));
    for p in predictions {
        let s: Vec<String> = p.prediction.scores.iter().map(f64::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.epoch_index,
            p.truth.code(),
            p.prediction.label.code(),
            s.join(",")
        );
    }
    out
}

pub fn write_predictions_csv(predictions: &[EpochPrediction], path: &Path) -> Result<(), EvalError> {
    write_text(path, &format_predictions_csv(predictions))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(subject: u16, model: &str, accuracy: f64) -> ResultRow {
        ResultRow {
            subject,
            model: model.to_owned(),
            accuracy,
            recall: accuracy,
            specificity: 0.1 + accuracy / 2.0,
            f1: accuracy,
            fit_seconds: 0.000123,
            model_bytes: 4096,
            validation_accuracy: Some(0.975),
            undefined_classes: vec![],
        }
    }

    #[test]
    fn metric_formatting() {
        assert_eq!(format_metric(0.995), "0.995");
        assert_eq!(format_metric(0.6746), "0.6746");
        assert_eq!(format_metric(1.0), "1.0");
        assert_eq!(format_metric(0.0), "0.0");
        assert_eq!(format_metric(0.12345678), "0.1235");
    }

    #[test]
    fn ours_row_sits_beside_baselines() {
        let rows = vec![row(1, "fine-knn", 0.99), row(2, "fine-knn", 1.0)];
        let csv = render_comparison_csv(&rows, &BaselineTable::published());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "Cho et al.,0.6746,,,");
        assert_eq!(lines[4], "Sadiq et al. (2022),0.8769,0.8762,0.8775,0.877");
        assert!(lines.last().unwrap().starts_with("Ours,0.995,"));
        assert!(render_comparison_markdown(&rows, &BaselineTable::published()).contains("| Ours | 0.995 |"));
    }

    #[test]
    fn one_ours_row_per_model() {
        let rows = vec![row(1, "qda", 0.5), row(1, "fine-knn", 1.0)];
        let csv = render_comparison_csv(&rows, &BaselineTable::empty());
        assert_eq!(
            csv,
            "approach,accuracy,recall,specificity,f1\nOurs (qda),0.5,0.5,0.35,0.5\nOurs (fine-knn),1.0,1.0,0.6,1.0\n"
        );
        assert_eq!(render_per_subject_csv(&rows), "subject,qda,fine-knn\n1,0.5,1\n");
    }

    #[test]
    fn results_round_trip_exactly() {
        let mut rows = vec![row(3, "qda", 2.0 / 3.0), row(4, "wide-nn", 0.1 + 0.2)];
        rows[1].validation_accuracy = None;
        rows[1].undefined_classes = vec!["rest".into(), "left".into()];
        let text = format_results_csv(&rows);
        assert_eq!(parse_results_csv(&text).unwrap(), rows);
        assert!(text.starts_with("subject,model,accuracy,recall,specificity,f1,fit_seconds,model_bytes"));
    }

    #[test]
    fn malformed_results_are_rejected() {
        assert!(parse_results_csv("nope\n").is_err());
        let text = format!("{RESULTS_HEADER}\n1,qda,0.5\n");
        assert!(matches!(parse_results_csv(&text), Err(EvalError::BadResults { line: 2, .. })));
    }

    #[test]
    fn report_is_regenerated_identically() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row(1, "cos-knn", 0.85), row(2, "cos-knn", 0.9)];
        let results = dir.path().join("results.csv");
        write_results_csv(&rows, &results).unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        std::fs::create_dir_all(&a).unwrap();
        std::fs::create_dir_all(&b).unwrap();
        emit_comparison_report(&rows, &BaselineTable::published(), &a).unwrap();
        emit_comparison_report(&read_results_csv(&results).unwrap(), &BaselineTable::published(), &b).unwrap();
        for f in ["comparison.md", "comparison.csv", "per_subject_accuracy.csv"] {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
        }
        assert!(matches!(
            emit_comparison_report(&[], &BaselineTable::empty(), &a),
            Err(EvalError::Empty)
        ));
    }

    #[test]
    fn confusion_csv_layout() {
        let cm = ConfusionMatrix::from_rows([[3, 1, 0], [0, 4, 0], [1, 0, 2]]);
        assert_eq!(
            format_confusion_csv(&cm),
            "true\\predicted,left,right,rest\nleft,3,1,0\nright,0,4,0\nrest,1,0,2\n"
        );
    }
}
