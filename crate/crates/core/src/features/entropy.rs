use super::spectrum::Spectrogram;
use super::FeatureError;

/// Normalises a power spectrum into a probability distribution over bins.
pub fn spectral_probabilities(spectrum: &[f64]) -> Result<Vec<f64>, FeatureError> {
    let total = compensated_sum(spectrum);
    if spectrum.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(FeatureError::NegativePower);
    }
    if total <= 0.0 {
        return Err(FeatureError::AllZeroSpectrum);
    }
    Ok(spectrum.iter().map(|&p| p / total).collect())
}

/// Neumaier summation. A spectrum of `M` equal bins sums to exactly `M · c`
/// when that product is representable, so a flat spectrum yields exactly
/// uniform probabilities.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Shannon entropy in bits, with `0 · log 0 = 0`.
pub fn entropy_bits(probabilities: &[f64]) -> f64 {
    // Equal non-zero masses: the sum below would accumulate rounding, the
    // closed form is exact.
    let mut support = probabilities.iter().filter(|&&p| p > 0.0);
    if let Some(&first) = support.clone().next() {
        if support.all(|&p| p == first) {
            let n = probabilities.iter().filter(|&&p| p > 0.0).count();
            return (n as f64).log2();
        }
    }
    let h: f64 = probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    // Clamp the last-ulp excursions so 0 ≤ H ≤ log2 M holds exactly.
    h.clamp(0.0, (probabilities.len() as f64).log2())
}

/// Shannon spectral entropy of a power spectrum, in bits, within
/// `[0, log2 M]` for `M` bins.
pub fn spectral_entropy(spectrum: &[f64]) -> Result<f64, FeatureError> {
    Ok(entropy_bits(&spectral_probabilities(spectrum)?))
}

/// Per-frame spectral entropy: each frame is normalised by its own total
/// power before the entropy is taken.
pub fn instantaneous_spectral_entropy(spec: &Spectrogram) -> Result<Vec<f64>, FeatureError> {
    spec.power
        .rows()
        .into_iter()
        .enumerate()
        .map(|(frame, row)| {
            let row: Vec<f64> = row.to_vec();
            spectral_entropy(&row).map_err(|e| match e {
                FeatureError::AllZeroSpectrum => FeatureError::ZeroPowerFrame { frame },
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::spectrogram;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn degenerate_and_uniform_cases() {
        let mut single = vec![0.0; 10];
        single[3] = 4.2;
        assert_eq!(spectral_entropy(&single).unwrap(), 0.0);
        assert_eq!(spectral_entropy(&vec![0.7; 64]).unwrap(), 6.0);
        let mut two = vec![0.0; 16];
        two[0] = 0.5;
        two[1] = 0.5;
        assert_eq!(spectral_entropy(&two).unwrap(), 1.0);
    }

    #[test]
    fn all_zero_is_an_error() {
        assert!(matches!(spectral_entropy(&[0.0; 8]), Err(FeatureError::AllZeroSpectrum)));
        assert!(matches!(spectral_entropy(&[]), Err(FeatureError::AllZeroSpectrum)));
        assert!(matches!(spectral_entropy(&[1.0, -1.0]), Err(FeatureError::NegativePower)));
    }

    fn spec_of(rows: Vec<Vec<f64>>) -> Spectrogram {
        let (f, b) = (rows.len(), rows[0].len());
        Spectrogram {
            power: Array2::from_shape_vec((f, b), rows.into_iter().flatten().collect()).unwrap(),
            frame_times: (0..f).map(|t| t as f64).collect(),
            bin_frequencies: (0..b).map(|k| k as f64).collect(),
            window: 2 * (b - 1),
            hop: 1,
        }
    }

    #[test]
    fn identical_frames_give_constant_ise() {
        let row = vec![1.0, 3.0, 0.5, 2.0, 0.0];
        let h = instantaneous_spectral_entropy(&spec_of(vec![row.clone(); 6])).unwrap();
        assert!(h.iter().all(|&v| v == h[0]));
    }

    #[test]
    fn single_active_bin_frame() {
        let h = instantaneous_spectral_entropy(&spec_of(vec![
            vec![1.0, 1.0, 1.0, 1.0],
            vec![0.0, 0.0, 9.0, 0.0],
        ]))
        .unwrap();
        assert_eq!(h, vec![2.0, 0.0]);
    }

    #[test]
    fn zero_frame_is_reported_by_index() {
        let err = instantaneous_spectral_entropy(&spec_of(vec![vec![1.0, 1.0], vec![0.0, 0.0]])).unwrap_err();
        assert!(matches!(err, FeatureError::ZeroPowerFrame { frame: 1 }));
    }

    #[test]
    fn broadband_noise_is_near_maximal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut mean = 0.0;
        let runs = 50;
        for _ in 0..runs {
            let x: Vec<f64> = (0..1536).map(|_| StandardNormal.sample(&mut rng)).collect();
            let s = spectrogram(&x, 256, 128, 512.0).unwrap();
            let h = instantaneous_spectral_entropy(&s).unwrap();
            mean += h.iter().sum::<f64>() / h.len() as f64;
        }
        mean /= runs as f64;
        let max = 129f64.log2();
        assert!(mean > 0.9 * max && mean <= max, "{mean} vs {max}");
    }
}
