//! Digital Butterworth bandpass design.
//!
//! Analog low-pass prototype → lowpass-to-bandpass transform → bilinear
//! transform with pre-warped band edges. Poles are grouped into conjugate
//! pairs, and each pair becomes one second-order section with one zero at
//! z = 1 and one at z = −1. Every section is scaled to unit gain at the
//! digital band centre, so intermediate signals stay in range even for
//! high orders.

use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex64;

use super::PreprocessError;
use crate::model::Epoch;

/// Poles must sit at least this far inside the unit circle.
const STABILITY_MARGIN: f64 = 1e-9;

/// How `order` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderConvention {
    /// `order` is the analog low-pass prototype order; the bandpass has
    /// `2 · order` poles and `order` sections.
    Prototype,
    /// `order` is the final bandpass order and must be even.
    Bandpass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub sample_rate_hz: f64,
    pub convention: OrderConvention,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            low_hz: 8.0,
            high_hz: 30.0,
            order: 30,
            sample_rate_hz: 512.0,
            convention: OrderConvention::Prototype,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let nyquist = self.sample_rate_hz / 2.0;
        let finite = self.low_hz.is_finite() && self.high_hz.is_finite() && self.sample_rate_hz.is_finite();
        if !finite || !(0.0 < self.low_hz && self.low_hz < self.high_hz && self.high_hz < nyquist) {
            return Err(PreprocessError::InvalidBand(format!(
                "need 0 < low ({}) < high ({}) < Nyquist ({nyquist})",
                self.low_hz, self.high_hz
            )));
        }
        if self.order == 0 {
            return Err(PreprocessError::InvalidBand("order must be positive".into()));
        }
        if self.convention == OrderConvention::Bandpass && self.order % 2 != 0 {
            return Err(PreprocessError::InvalidBand(format!(
                "bandpass order {} is odd",
                self.order
            )));
        }
        Ok(())
    }

    pub fn prototype_order(&self) -> usize {
        match self.convention {
            OrderConvention::Prototype => self.order,
            OrderConvention::Bandpass => self.order / 2,
        }
    }

    /// Digital frequency (Hz) that the bilinear transform maps the analog
    /// geometric centre to.
    pub fn center_hz(&self) -> f64 {
        let fs = self.sample_rate_hz;
        let w1 = (PI * self.low_hz / fs).tan();
        let w2 = (PI * self.high_hz / fs).tan();
        (w1 * w2).sqrt().atan() * fs / PI
    }
}

/// `H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Response at `z = e^{jω}`.
    pub fn response_at(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }

    /// Roots of `z² + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }

    /// Direct form II transposed, zero initial state, in place.
    fn run(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b0 * input + s1;
            s1 = self.b1 * input - self.a1 * y + s2;
            s2 = self.b2 * input - self.a2 * y;
            *v = y;
        }
    }
}

/// Second-order sections in application order, plus an overall gain.
#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade {
    sections: Vec<Biquad>,
    gain: f64,
    sample_rate_hz: f64,
}

impl BiquadCascade {
    pub fn new(sections: Vec<Biquad>, gain: f64, sample_rate_hz: f64) -> Self {
        Self {
            sections,
            gain,
            sample_rate_hz,
        }
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * PI * freq_hz / self.sample_rate_hz;
        self.sections
            .iter()
            .fold(Complex64::new(self.gain, 0.0), |acc, s| acc * s.response_at(omega))
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Filters one signal causally from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().map(|v| v * self.gain).collect();
        for s in &self.sections {
            s.run(&mut y);
        }
        y
    }
}

/// Butterworth bandpass as stable second-order sections.
pub fn design_bandpass(spec: &FilterSpec) -> Result<BiquadCascade, PreprocessError> {
    spec.validate()?;
    let n = spec.prototype_order();
    let fs = spec.sample_rate_hz;
    let k = 2.0 * fs;

    // Pre-warped analog band edges (rad/s).
    let w1 = k * (PI * spec.low_hz / fs).tan();
    let w2 = k * (PI * spec.high_hz / fs).tan();
    let bw = w2 - w1;
    let w0_sq = w1 * w2;

    let mut upper = Vec::with_capacity(n);
    let mut real = Vec::new();
    for i in 0..n {
        let theta = PI * (2 * i + 1 + n) as f64 / (2 * n) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        let half = proto * (bw / 2.0);
        let root = (half * half - w0_sq).sqrt();
        for s in [half + root, half - root] {
            let z = (k + s) / (k - s);
            // Every pole has its conjugate elsewhere in the set; keep one of each.
            if z.im.abs() <= 1e-12 * z.norm().max(1.0) {
                real.push(z.re);
            } else if z.im > 0.0 {
                upper.push(z);
            }
        }
    }
    if real.len() % 2 != 0 || upper.len() * 2 + real.len() != 2 * n {
        return Err(PreprocessError::InvalidBand(format!(
            "pole pairing failed: {} complex, {} real",
            upper.len(),
            real.len()
        )));
    }

    // (a1, a2) per section, least resonant first.
    let mut denominators: Vec<(f64, f64, f64)> = upper
        .iter()
        .map(|p| (-2.0 * p.re, p.norm_sqr(), p.norm()))
        .collect();
    real.sort_by(f64::total_cmp);
    for pair in real.chunks_exact(2) {
        let radius = pair[0].abs().max(pair[1].abs());
        denominators.push((-(pair[0] + pair[1]), pair[0] * pair[1], radius));
    }
    denominators.sort_by(|a, b| a.2.total_cmp(&b.2));

    let radius = denominators.iter().map(|d| d.2).fold(0.0, f64::max);
    if radius >= 1.0 - STABILITY_MARGIN || !radius.is_finite() {
        return Err(PreprocessError::UnstableDesign { radius });
    }

    let omega0 = 2.0 * PI * spec.center_hz() / fs;
    let sections: Vec<Biquad> = denominators
        .iter()
        .map(|&(a1, a2, _)| {
            let raw = Biquad { b0: 1.0, b1: 0.0, b2: -1.0, a1, a2 };
            let g = 1.0 / raw.response_at(omega0).norm();
            Biquad { b0: g, b1: 0.0, b2: -g, ..raw }
        })
        .collect();
    let mut cascade = BiquadCascade::new(sections, 1.0, fs);
    cascade.gain = 1.0 / cascade.magnitude(spec.center_hz());
    Ok(cascade)
}

/// Filters every channel independently with zero initial state.
pub fn apply_filter(cascade: &BiquadCascade, epoch: &Epoch) -> Result<Epoch, PreprocessError> {
    if (cascade.sample_rate_hz - epoch.sample_rate_hz()).abs() > 1e-9 * cascade.sample_rate_hz {
        return Err(PreprocessError::RateMismatch {
            filter: cascade.sample_rate_hz,
            epoch: epoch.sample_rate_hz(),
        });
    }
    let (n_ch, n_s) = epoch.data().dim();
    let mut out = Array2::zeros((n_ch, n_s));
    for (channel, (src, mut dst)) in epoch
        .data()
        .rows()
        .into_iter()
        .zip(out.rows_mut())
        .enumerate()
    {
        let y = cascade.filter(&src.to_vec());
        if y.iter().any(|v| !v.is_finite()) {
            return Err(PreprocessError::NonFiniteOutput { channel });
        }
        dst.assign(&ndarray::ArrayView1::from(&y[..]));
    }
    Ok(epoch.with_data(out)?)
}
