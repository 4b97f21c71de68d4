use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::FeatureError;

/// One-sided squared-magnitude DFT, `|X(k)|²` for `k = 0..=n/2`.
pub fn power_spectrum(signal: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if signal.is_empty() {
        return Err(FeatureError::EmptySignal);
    }
    let fft = FftPlanner::new().plan_fft_forward(signal.len());
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    Ok(buf[..signal.len() / 2 + 1].iter().map(|c| c.norm_sqr()).collect())
}

/// Time-domain energy implied by a one-sided spectrum of an `n`-point real
/// signal (Parseval): interior bins count twice, DC and (even `n`) Nyquist once.
pub fn spectrum_energy(spectrum: &[f64], n: usize) -> f64 {
    let last = spectrum.len() - 1;
    let total: f64 = spectrum
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let edge = k == 0 || (n % 2 == 0 && k == last);
            if edge {
                p
            } else {
                2.0 * p
            }
        })
        .sum();
    total / n as f64
}

/// Symmetric Hamming window.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Short-time power spectrum, `[frames × bins]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub power: Array2<f64>,
    /// Centre of each frame, seconds from the first sample.
    pub frame_times: Vec<f64>,
    pub bin_frequencies: Vec<f64>,
    pub window: usize,
    pub hop: usize,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.power.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.power.ncols()
    }
}

/// Reusable Hamming-windowed STFT for one window length.
#[derive(Clone)]
pub struct StftPlan {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftPlan").field("window", &self.window.len()).finish()
    }
}

impl StftPlan {
    pub fn new(window: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(window.max(1));
        Self {
            window: hamming(window.max(1)),
            fft,
        }
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn run(&self, signal: &[f64], hop: usize, sample_rate_hz: f64) -> Result<Spectrogram, FeatureError> {
        let window = self.window.len();
        if hop == 0 {
            return Err(FeatureError::BadHop);
        }
        if window > signal.len() {
            return Err(FeatureError::WindowTooLong {
                window,
                len: signal.len(),
            });
        }
        let frames = (signal.len() - window) / hop + 1;
        let bins = window / 2 + 1;
        let mut power = Array2::zeros((frames, bins));
        let mut buf = vec![Complex64::default(); window];
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        for (t, mut row) in power.rows_mut().into_iter().enumerate() {
            let start = t * hop;
            for ((b, &x), &w) in buf.iter_mut().zip(&signal[start..start + window]).zip(&self.window) {
                *b = Complex64::new(x * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in row.iter_mut().zip(&buf[..bins]) {
                *p = c.norm_sqr();
            }
        }
        let frame_times = (0..frames)
            .map(|t| (t * hop) as f64 / sample_rate_hz + (window as f64 / 2.0) / sample_rate_hz)
            .collect();
        let bin_frequencies = (0..bins).map(|k| k as f64 * sample_rate_hz / window as f64).collect();
        Ok(Spectrogram {
            power,
            frame_times,
            bin_frequencies,
            window,
            hop,
        })
    }
}

/// Hamming-windowed one-sided power frames with
/// `⌊(len − window)/hop⌋ + 1` frames.
pub fn spectrogram(
    signal: &[f64],
    window: usize,
    hop: usize,
    sample_rate_hz: f64,
) -> Result<Spectrogram, FeatureError> {
    if window == 0 {
        return Err(FeatureError::WindowTooLong { window, len: signal.len() });
    }
    StftPlan::new(window).run(signal, hop, sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn sinusoid_on_a_bin_is_a_single_line() {
        let n = 256;
        let k0 = 20;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * k0 as f64 * i as f64 / n as f64).cos()).collect();
        let s = power_spectrum(&x).unwrap();
        assert_eq!(s.len(), 129);
        let peak = s[k0];
        for (k, &p) in s.iter().enumerate() {
            if k != k0 {
                assert!(p < 1e-10 * peak, "bin {k}: {p}");
            }
        }
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = vec![0.0; 100];
        x[0] = 1.0;
        let s = power_spectrum(&x).unwrap();
        assert!(s.iter().all(|&p| (p - 1.0).abs() < 1e-15));
    }

    #[test]
    fn parseval_on_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [255usize, 256, 1000, 1536] {
            let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let direct: f64 = x.iter().map(|v| v * v).sum();
            let spectral = spectrum_energy(&power_spectrum(&x).unwrap(), n);
            assert!((spectral - direct).abs() <= 1e-9 * direct, "n = {n}");
        }
    }

    #[test]
    fn empty_signal() {
        assert!(matches!(power_spectrum(&[]), Err(FeatureError::EmptySignal)));
    }

    #[test]
    fn frame_count() {
        let x = vec![1.0; 256];
        assert_eq!(spectrogram(&x, 256, 128, 512.0).unwrap().n_frames(), 1);
        let x = vec![1.0; 1536];
        let s = spectrogram(&x, 256, 128, 512.0).unwrap();
        assert_eq!(s.n_frames(), 11);
        assert_eq!(s.n_bins(), 129);
        assert_eq!(s.bin_frequencies[1], 2.0);
        assert_eq!(spectrogram(&vec![0.0; 1000], 100, 33, 1.0).unwrap().n_frames(), 28);
        assert!(matches!(spectrogram(&x, 2048, 128, 512.0), Err(FeatureError::WindowTooLong { .. })));
        assert!(matches!(spectrogram(&x, 256, 0, 512.0), Err(FeatureError::BadHop)));
    }

    #[test]
    fn stationary_sinusoid_keeps_its_peak() {
        let fs = 512.0;
        let x: Vec<f64> = (0..1536).map(|i| (2.0 * PI * 12.0 * i as f64 / fs).sin()).collect();
        let s = spectrogram(&x, 256, 128, fs).unwrap();
        let peaks: Vec<usize> = s.power.rows().into_iter().map(|r| argmax(r.as_slice().unwrap())).collect();
        assert!(peaks.iter().all(|&p| p == peaks[0]));
        assert_eq!(peaks[0], 6);
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
    }

    #[test]
    fn chirp_peak_moves_upward() {
        let fs = 512.0;
        let dur = 3.0;
        let (f0, f1) = (10.0, 30.0);
        let x: Vec<f64> = (0..(fs * dur) as usize)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * (f0 * t + (f1 - f0) * t * t / (2.0 * dur))).sin()
            })
            .collect();
        let s = spectrogram(&x, 256, 128, fs).unwrap();
        let peaks: Vec<usize> = s.power.rows().into_iter().map(|r| argmax(r.as_slice().unwrap())).collect();
        assert!(peaks.windows(2).all(|w| w[1] >= w[0]), "{peaks:?}");
        assert!(peaks.last().unwrap() > &peaks[0]);
        // Instantaneous frequency at the frame centre lands within one bin.
        for (t, &p) in s.frame_times.iter().zip(&peaks) {
            let inst = f0 + (f1 - f0) * t / dur;
            assert!((s.bin_frequencies[p] - inst).abs() <= 2.0, "t={t}: {} vs {inst}", s.bin_frequencies[p]);
        }
    }
}
