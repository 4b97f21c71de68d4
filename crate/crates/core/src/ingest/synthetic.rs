//! Synthetic subjects with a known contralateral signature.
//!
//! Left-hand epochs carry a 10 Hz + 22 Hz oscillation on right-hemisphere
//! electrodes, right-hand epochs on left-hemisphere electrodes, and rest epochs
//! carry noise only. Every channel always consumes the same random draws, so
//! two specs that differ only in `lateralization_strength` share their noise
//! and phases exactly.

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::channels::{Hemisphere, DEFAULT_MOTOR_CHANNELS};
use super::IngestError;
use crate::model::{ClassLabel, Epoch, Provenance, SubjectDataset};

const ALPHA_HZ: f64 = 10.0;
const BETA_HZ: f64 = 22.0;
const BETA_RELATIVE_AMPLITUDE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    pub n_epochs_per_subject: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
    /// Peak amplitude of the class oscillation, in the same units as `noise_std`.
    pub lateralization_strength: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_subjects: 52,
            n_epochs_per_subject: 100,
            n_channels: 10,
            n_samples: 1536,
            sample_rate_hz: 512.0,
            lateralization_strength: 20.0,
            noise_std: 10.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |msg: &str| Err(IngestError::InvalidSpec(msg.to_owned()));
        if self.n_subjects == 0 || self.n_subjects > u16::MAX as usize {
            return bad("n_subjects must be in 1..=65535");
        }
        if self.n_epochs_per_subject == 0 {
            return bad("n_epochs_per_subject must be positive");
        }
        if self.n_channels == 0 || self.n_channels > u16::MAX as usize {
            return bad("n_channels must be in 1..=65535");
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive");
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz must be positive");
        }
        if !(self.lateralization_strength.is_finite() && self.lateralization_strength >= 0.0) {
            return bad("lateralization_strength must be >= 0");
        }
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return bad("noise_std must be > 0");
        }
        Ok(())
    }

    /// The motor set for the first ten channels, `E11`, `E12`, ... beyond.
    pub fn channel_names(&self) -> Vec<String> {
        (0..self.n_channels)
            .map(|i| match DEFAULT_MOTOR_CHANNELS.get(i) {
                Some(n) => (*n).to_owned(),
                None => format!("E{}", i + 1),
            })
            .collect()
    }

    /// Class of the `index`-th epoch: Left, Right, Rest, Left, ...
    pub fn label_of(index: usize) -> ClassLabel {
        ClassLabel::ALL[index % ClassLabel::COUNT]
    }
}

/// Generates subject `subject_index` (0-based) of the corpus. Subject ids are
/// 1-based and the RNG seed is `seed + subject_index`.
pub fn generate_subject(spec: &SyntheticSpec, subject_index: usize) -> Result<SubjectDataset, IngestError> {
    spec.validate()?;
    let subject_id = u16::try_from(subject_index + 1)
        .map_err(|_| IngestError::InvalidSpec("subject index too large".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(subject_index as u64));
    let names: Arc<[String]> = spec.channel_names().into();
    let sides: Vec<Hemisphere> = names.iter().map(|n| Hemisphere::of(n)).collect();
    let dt = 1.0 / spec.sample_rate_hz;

    let mut epochs = Vec::with_capacity(spec.n_epochs_per_subject);
    for e in 0..spec.n_epochs_per_subject {
        let label = SyntheticSpec::label_of(e);
        let active = match label {
            ClassLabel::Left => Some(Hemisphere::Right),
            ClassLabel::Right => Some(Hemisphere::Left),
            ClassLabel::Rest => None,
        };
        let mut data = Array2::zeros((spec.n_channels, spec.n_samples));
        for (c, mut row) in data.rows_mut().into_iter().enumerate() {
            let phase_alpha = rng.random::<f64>() * TAU;
            let phase_beta = rng.random::<f64>() * TAU;
            let gain = rng.random_range(0.75..1.25);
            let amplitude = if active == Some(sides[c]) {
                spec.lateralization_strength * gain
            } else {
                0.0
            };
            for (s, v) in row.iter_mut().enumerate() {
                let t = s as f64 * dt;
                let noise: f64 = StandardNormal.sample(&mut rng);
                let osc = (TAU * ALPHA_HZ * t + phase_alpha).sin()
                    + BETA_RELATIVE_AMPLITUDE * (TAU * BETA_HZ * t + phase_beta).sin();
                *v = amplitude * osc + spec.noise_std * noise;
            }
        }
        epochs.push(Epoch::new(
            subject_id,
            label,
            data,
            spec.sample_rate_hz,
            Arc::clone(&names),
        )?);
    }
    Ok(SubjectDataset::new(subject_id, Provenance::Synthetic, epochs)?)
}

/// One dataset per subject, in subject order.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<SubjectDataset>, IngestError> {
    spec.validate()?;
    (0..spec.n_subjects).map(|i| generate_subject(spec, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::power_spectrum;

    fn small(strength: f64) -> SyntheticSpec {
        SyntheticSpec {
            n_subjects: 2,
            n_epochs_per_subject: 150,
            lateralization_strength: strength,
            noise_std: 10.0,
            seed: 11,
            ..SyntheticSpec::default()
        }
    }

    /// Mean 8–30 Hz power of the given channels over epochs of one class.
    fn band_power(ds: &SubjectDataset, label: ClassLabel, side: Hemisphere) -> f64 {
        let names = ds.channel_names().unwrap().to_vec();
        let rate = ds.sample_rate_hz().unwrap();
        let mut total = 0.0;
        let mut count = 0;
        for e in ds.epochs().iter().filter(|e| e.label() == label) {
            for (c, row) in e.data().rows().into_iter().enumerate() {
                if Hemisphere::of(&names[c]) != side {
                    continue;
                }
                let x: Vec<f64> = row.to_vec();
                let spec = power_spectrum(&x).unwrap();
                let df = rate / x.len() as f64;
                total += spec
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| (8.0..=30.0).contains(&(*k as f64 * df)))
                    .map(|(_, p)| p)
                    .sum::<f64>();
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn geometry_and_balance() {
        let ds = generate_synthetic(&SyntheticSpec { n_subjects: 3, ..small(5.0) }).unwrap();
        assert_eq!(ds.len(), 3);
        for (i, d) in ds.iter().enumerate() {
            assert_eq!(d.subject_id() as usize, i + 1);
            assert_eq!(d.n_channels(), Some(10));
            assert_eq!(d.n_samples(), Some(1536));
            assert_eq!(d.class_counts(), [50, 50, 50]);
            assert_eq!(d.provenance(), Provenance::Synthetic);
        }
        let default = SyntheticSpec::default();
        assert_eq!(
            (default.n_epochs_per_subject, default.n_channels, default.n_samples, default.sample_rate_hz),
            (100, 10, 1536, 512.0)
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(&small(5.0)).unwrap();
        let b = generate_synthetic(&small(5.0)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticSpec { seed: 12, ..small(5.0) }).unwrap();
        assert_ne!(a[0], c[0]);
        // Subject i of seed s is subject i - 1 of seed s + 1.
        assert_eq!(a[1].epochs()[0].data(), c[0].epochs()[0].data());
    }

    #[test]
    fn contralateral_power_exceeds_rest() {
        let ds = generate_subject(&small(5.0), 0).unwrap();
        let left_on_right = band_power(&ds, ClassLabel::Left, Hemisphere::Right);
        let rest_on_right = band_power(&ds, ClassLabel::Rest, Hemisphere::Right);
        let right_on_left = band_power(&ds, ClassLabel::Right, Hemisphere::Left);
        let rest_on_left = band_power(&ds, ClassLabel::Rest, Hemisphere::Left);
        assert!(left_on_right > rest_on_right, "{left_on_right} vs {rest_on_right}");
        assert!(right_on_left > rest_on_left, "{right_on_left} vs {rest_on_left}");
        // Ipsilateral channels stay at the noise floor.
        let left_on_left = band_power(&ds, ClassLabel::Left, Hemisphere::Left);
        assert!((left_on_left / rest_on_left - 1.0).abs() < 0.1);
    }

    #[test]
    fn band_power_difference_grows_with_strength() {
        let mut last = f64::NEG_INFINITY;
        for strength in [0.0, 1.0, 2.0, 4.0, 8.0] {
            let ds = generate_subject(&small(strength), 0).unwrap();
            let diff = band_power(&ds, ClassLabel::Left, Hemisphere::Right)
                - band_power(&ds, ClassLabel::Rest, Hemisphere::Right);
            assert!(diff > last, "strength {strength}: {diff} <= {last}");
            last = diff;
        }
    }

    #[test]
    fn zero_strength_has_no_class_signal() {
        let a = generate_subject(&small(0.0), 0).unwrap();
        let left = band_power(&a, ClassLabel::Left, Hemisphere::Right);
        let rest = band_power(&a, ClassLabel::Rest, Hemisphere::Right);
        assert!((left / rest - 1.0).abs() < 0.1);
    }

    #[test]
    fn invalid_specs() {
        assert!(SyntheticSpec { n_subjects: 0, ..small(1.0) }.validate().is_err());
        assert!(SyntheticSpec { noise_std: 0.0, ..small(1.0) }.validate().is_err());
        assert!(SyntheticSpec { lateralization_strength: -1.0, ..small(1.0) }.validate().is_err());
        assert!(SyntheticSpec { n_samples: 0, ..small(1.0) }.validate().is_err());
    }

    #[test]
    fn extra_channels_get_generic_names() {
        let spec = SyntheticSpec { n_channels: 12, ..small(1.0) };
        let names = spec.channel_names();
        assert_eq!(&names[..10], &DEFAULT_MOTOR_CHANNELS.map(String::from));
        assert_eq!(names[10], "E11");
    }
}
