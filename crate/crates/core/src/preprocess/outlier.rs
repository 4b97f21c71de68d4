use super::PreprocessError;
use crate::model::SubjectDataset;

/// What a "mean of an epoch" is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierMode {
    /// One scalar per epoch, averaged over every channel and sample.
    EpochMean,
    /// One mean per channel; an epoch is removed if any channel is out of band.
    PerChannel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierReport {
    pub mode: OutlierMode,
    /// Scalar mean of every input epoch, all channels pooled.
    pub epoch_means: Vec<f64>,
    /// Centre and sample standard deviation of the epoch means. In
    /// per-channel mode these are the pooled values, reported for reference.
    pub mean: f64,
    pub std: f64,
    /// `(mean, std)` per channel; empty in [`OutlierMode::EpochMean`].
    pub channel_stats: Vec<(f64, f64)>,
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
}

impl OutlierReport {
    pub fn is_kept(&self, index: usize) -> bool {
        self.kept.binary_search(&index).is_ok()
    }

    pub fn lower_bound(&self) -> f64 {
        self.mean - 3.0 * self.std
    }

    pub fn upper_bound(&self) -> f64 {
        self.mean + 3.0 * self.std
    }
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `value ∈ [mean − 3σ, mean + 3σ]`, with a few ulps of slack so that a set of
/// identical means (σ = 0) is kept despite rounding in the average.
fn within_three_sigma(value: f64, mean: f64, std: f64) -> bool {
    let slack = 4.0 * f64::EPSILON * (value.abs() + mean.abs());
    (value - mean).abs() <= 3.0 * std + slack
}

/// Single-pass 3σ rejection on scalar epoch means.
pub fn reject_outliers(dataset: &SubjectDataset) -> Result<(SubjectDataset, OutlierReport), PreprocessError> {
    reject_outliers_with(dataset, OutlierMode::EpochMean)
}

/// Single-pass 3σ rejection: statistics are computed once over the input
/// epochs and never re-estimated on the survivors. Survivor order is kept.
pub fn reject_outliers_with(
    dataset: &SubjectDataset,
    mode: OutlierMode,
) -> Result<(SubjectDataset, OutlierReport), PreprocessError> {
    let n = dataset.len();
    if n < 2 {
        return Err(PreprocessError::TooFewEpochs(n));
    }
    let epoch_means: Vec<f64> = dataset.epochs().iter().map(|e| e.mean()).collect();
    let (mean, std) = mean_and_std(&epoch_means);

    let (channel_stats, keep): (Vec<(f64, f64)>, Vec<bool>) = match mode {
        OutlierMode::EpochMean => (
            Vec::new(),
            epoch_means.iter().map(|&m| within_three_sigma(m, mean, std)).collect(),
        ),
        OutlierMode::PerChannel => {
            let n_ch = dataset.n_channels().unwrap_or(0);
            let per_epoch: Vec<Vec<f64>> = dataset
                .epochs()
                .iter()
                .map(|e| e.data().rows().into_iter().map(|r| r.mean().unwrap_or(0.0)).collect())
                .collect();
            let stats: Vec<(f64, f64)> = (0..n_ch)
                .map(|c| mean_and_std(&per_epoch.iter().map(|m| m[c]).collect::<Vec<_>>()))
                .collect();
            let keep = per_epoch
                .iter()
                .map(|m| m.iter().zip(&stats).all(|(&v, &(mu, sd))| within_three_sigma(v, mu, sd)))
                .collect();
            (stats, keep)
        }
    };

    let kept: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    let removed: Vec<usize> = (0..n).filter(|&i| !keep[i]).collect();
    let report = OutlierReport {
        mode,
        epoch_means,
        mean,
        std,
        channel_stats,
        kept,
        removed,
    };
    Ok((dataset.subset(&report.kept), report))
}
