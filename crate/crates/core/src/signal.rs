//! Band-limited random pressure synthesis and spectral post-processing.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const P_REF: f64 = 20e-6;

/// Amplitude history parameters for `f(t) = a(t) p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadSpec {
    pub cutoff_hz: f64,
    pub oaspl_db: f64,
    pub dt: f64,
    pub duration: f64,
    pub filter_order: usize,
    pub seed: u64,
}

impl LoadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Argument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(Error::Argument(format!("duration {} shorter than dt", self.duration)));
        }
        let nyquist = 0.5 / self.dt;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < nyquist) {
            return Err(Error::Argument(format!(
                "cutoff {} Hz outside (0, {nyquist}) Hz",
                self.cutoff_hz
            )));
        }
        if !self.oaspl_db.is_finite() {
            return Err(Error::Argument("OASPL must be finite".into()));
        }
        if self.filter_order < 2 || self.filter_order % 2 != 0 {
            return Err(Error::Argument(format!(
                "filter order must be even and >= 2, got {}",
                self.filter_order
            )));
        }
        Ok(())
    }

    /// Number of samples including `t = 0`.
    pub fn samples(&self) -> usize {
        (self.duration / self.dt).round() as usize + 1
    }
}

/// `p_ref · 10^(dB/20)`.
pub fn rms_from_oaspl(db: f64) -> f64 {
    P_REF * 10f64.powf(db / 20.0)
}

pub fn rms(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    (series.iter().map(|x| x * x).sum::<f64>() / series.len() as f64).sqrt()
}

/// `20 log10(rms / p_ref)`.
pub fn oaspl(series: &[f64]) -> f64 {
    20.0 * (rms(series) / P_REF).log10()
}

/// Second-order section `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Transposed direct form II from zero initial state.
    fn run(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b[0] * *v + s1;
            s1 = self.b[1] * *v - self.a[0] * y + s2;
            s2 = self.b[2] * *v - self.a[1] * y;
            *v = y;
        }
    }

    /// Complex response at normalized angular frequency `w` (rad/sample).
    fn response(&self, w: f64) -> Complex<f64> {
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (z1 * self.b[1] + z2 * self.b[2] + self.b[0]) / (z1 * self.a[0] + z2 * self.a[1] + 1.0)
    }
}

/// Digital Butterworth low-pass as cascaded biquads (bilinear transform with
/// cutoff prewarping).
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    sections: Vec<Biquad>,
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Self> {
        if order < 2 || order % 2 != 0 {
            return Err(Error::Argument(format!(
                "filter order must be even and >= 2, got {order}"
            )));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < 0.5 * fs) {
            return Err(Error::Argument(format!(
                "cutoff {cutoff_hz} Hz outside (0, {}) Hz",
                0.5 * fs
            )));
        }
        let k = 2.0 * fs;
        let wc = k * (PI * cutoff_hz / fs).tan();
        let sections = (0..order / 2)
            .map(|i| {
                // conjugate pole pair s = wc·exp(iθ), θ in the left half plane
                let theta = PI * (2 * i + 1 + order) as f64 / (2 * order) as f64;
                let a = -2.0 * theta.cos() * wc;
                let a0 = k * k + a * k + wc * wc;
                let g = wc * wc / a0;
                Biquad {
                    b: [g, 2.0 * g, g],
                    a: [(2.0 * wc * wc - 2.0 * k * k) / a0, (k * k - a * k + wc * wc) / a0],
                }
            })
            .collect();
        Ok(Self { sections })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn filter(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Forward then time-reversed pass: zero phase, squared magnitude.
    pub fn filtfilt(&self, x: &mut [f64]) {
        self.filter(x);
        x.reverse();
        self.filter(x);
        x.reverse();
    }

    /// `|H(f)|` for sample rate `fs`.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        self.sections.iter().map(|s| s.response(w).norm()).product()
    }
}

/// Gaussian white noise, zero-phase low-passed and scaled to the target OASPL.
pub fn gen_pressure(spec: &LoadSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x: Vec<f64> = (0..spec.samples()).map(|_| StandardNormal.sample(&mut rng)).collect();
    Butterworth::lowpass(spec.filter_order, spec.cutoff_hz, 1.0 / spec.dt)?.filtfilt(&mut x);
    let current = rms(&x);
    if !(current > 0.0) {
        return Err(Error::Argument("filtered series has zero power".into()));
    }
    let scale = rms_from_oaspl(spec.oaspl_db) / current;
    x.iter_mut().for_each(|v| *v *= scale);
    Ok(x)
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// `∫ S df` by the rectangle rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.resolution()
    }

    /// Values in dB re. `reference` (zero-valued bins map to `-inf`).
    pub fn decibels(&self, reference: f64) -> Vec<f64> {
        self.values.iter().map(|v| 10.0 * (v / reference).log10()).collect()
    }
}

/// Welch estimate: periodic Hann window, segments advanced by
/// `segment_len · (1 − overlap)`, density scaling, no detrending.
pub fn welch_psd(series: &[f64], fs: f64, segment_len: usize, overlap: f64) -> Result<Psd> {
    if segment_len < 2 || segment_len > series.len() {
        return Err(Error::Argument(format!(
            "segment length {segment_len} invalid for {} samples",
            series.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Argument(format!("overlap must be in [0, 1), got {overlap}")));
    }
    if !(fs > 0.0) {
        return Err(Error::Argument(format!("sample rate must be positive, got {fs}")));
    }
    let step = ((segment_len as f64 * (1.0 - overlap)).round() as usize).max(1);
    let window: Vec<f64> = (0..segment_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment_len as f64).cos())
        .collect();
    let power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let bins = segment_len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment_len <= series.len() {
        for ((b, x), w) in buf.iter_mut().zip(&series[start..start + segment_len]).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (fs * power * count as f64);
    let nyquist_bin = (segment_len % 2 == 0).then_some(bins - 1);
    let values = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let df = fs / segment_len as f64;
    Ok(Psd {
        frequencies: (0..bins).map(|k| k as f64 * df).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oaspl_reference_values() {
        assert!((rms_from_oaspl(144.0) - 316.98).abs() < 0.01);
        assert!(oaspl(&[P_REF, -P_REF]).abs() < 1e-12);
        assert!((oaspl(&[316.98, -316.98]) - 144.0).abs() < 0.01);
        assert!((oaspl(&[2.0, -2.0]) - oaspl(&[1.0, -1.0]) - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn butterworth_magnitude_shape() {
        let fs = 24000.0;
        let f = Butterworth::lowpass(12, 500.0, fs).unwrap();
        assert_eq!(f.sections().len(), 6);
        assert!((f.magnitude(0.0, fs) - 1.0).abs() < 1e-12);
        assert!((f.magnitude(500.0, fs) - 0.5f64.sqrt()).abs() < 1e-9);
        assert!(f.magnitude(1000.0, fs) < 10f64.powf(-70.0 / 20.0));
        assert!(Butterworth::lowpass(3, 500.0, fs).is_err());
        assert!(Butterworth::lowpass(4, 13000.0, fs).is_err());
    }

    #[test]
    fn filtfilt_has_zero_phase() {
        let f = Butterworth::lowpass(4, 50.0, 1000.0).unwrap();
        let mut x: Vec<f64> = (0..4000).map(|i| (2.0 * PI * 10.0 * i as f64 / 1000.0).sin()).collect();
        let orig = x.clone();
        f.filtfilt(&mut x);
        let g = f.magnitude(10.0, 1000.0).powi(2);
        // interior samples: pure gain, no lag
        for i in 1000..3000 {
            assert!((x[i] - g * orig[i]).abs() < 1e-6, "{i}");
        }
    }

    fn spec() -> LoadSpec {
        LoadSpec {
            cutoff_hz: 500.0,
            oaspl_db: 144.0,
            dt: 4.167e-5,
            duration: 10.0,
            filter_order: 12,
            seed: 42,
        }
    }

    #[test]
    fn generated_pressure_level_and_spectrum() {
        let s = spec();
        let a = gen_pressure(&s).unwrap();
        assert_eq!(a, gen_pressure(&s).unwrap());
        assert!((oaspl(&a) - 144.0).abs() <= 0.1);
        let fs = 1.0 / s.dt;
        let psd = welch_psd(&a, fs, 9000, 0.5).unwrap();
        let band: Vec<f64> = psd
            .frequencies
            .iter()
            .zip(&psd.values)
            .filter(|(f, _)| **f > 0.0 && **f <= 0.8 * s.cutoff_hz)
            .map(|(_, v)| *v)
            .collect();
        let level = band.iter().sum::<f64>() / band.len() as f64;
        for v in &band {
            assert!((10.0 * (v / level).log10()).abs() <= 3.0);
        }
        let k2 = (2.0 * s.cutoff_hz / psd.resolution()).round() as usize;
        assert!(10.0 * (psd.values[k2] / level).log10() <= -40.0);
        assert!(gen_pressure(&LoadSpec { filter_order: 5, ..s }).is_err());
        assert!(gen_pressure(&LoadSpec {
            cutoff_hz: 0.6 / s.dt,
            ..s
        })
        .is_err());
    }

    #[test]
    fn welch_resolution_and_parseval() {
        let fs = 24000.0;
        let n = 48000;
        let amp = 3.0;
        let x: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * PI * 1234.5 * i as f64 / fs).sin())
            .collect();
        let psd = welch_psd(&x, fs, 9000, 0.5).unwrap();
        assert_eq!(psd.resolution(), fs / 9000.0);
        assert!((psd.resolution() - 2.67).abs() < 0.005);
        let total = psd.integral();
        assert!((total - amp * amp / 2.0).abs() <= 0.02 * amp * amp / 2.0, "{total}");
    }

    #[test]
    fn white_noise_level() {
        let fs = 1000.0;
        let sigma: f64 = 1.7;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..400_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect();
        let psd = welch_psd(&x, fs, 1000, 0.5).unwrap();
        let mean = psd.values[1..psd.values.len() - 1].iter().sum::<f64>() / (psd.values.len() - 2) as f64;
        let expected = sigma * sigma / (fs / 2.0);
        assert!((mean - expected).abs() <= 0.05 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn welch_rejects_bad_arguments() {
        assert!(welch_psd(&[1.0; 10], 1.0, 20, 0.5).is_err());
        assert!(welch_psd(&[1.0; 10], 1.0, 4, 1.0).is_err());
        assert!(welch_psd(&[1.0; 10], 0.0, 4, 0.5).is_err());
    }
}
