//! Time-domain preprocessing, the STFT, and the dB-domain PSD transforms
//! that feed the masking model.

use std::f64::consts::PI;
use std::fmt;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Level assigned to zero-magnitude bins, in dB.
pub const FLOOR_DB: f64 = -200.0;

/// Mono PCM audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("audio buffer must contain at least one sample"));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiply every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|s| s * gain).collect(), self.sample_rate)
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Hamming,
}

impl Window {
    /// Periodic window of `len` samples.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        let (a0, a1) = match self {
            Window::Hann => (0.5, 0.5),
            Window::Hamming => (0.54, 0.46),
        };
        (0..len)
            .map(|n| a0 - a1 * (2.0 * PI * n as f64 / len as f64).cos())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub win_length: usize,
    pub hop_length: usize,
    pub n_fft: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            win_length: 400,
            hop_length: 160,
            n_fft: 400,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop_length == 0 || self.hop_length > self.win_length || self.win_length > self.n_fft {
            return Err(Error::invalid(format!(
                "stft requires 0 < hop_length ({}) <= win_length ({}) <= n_fft ({})",
                self.hop_length, self.win_length, self.n_fft
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.win_length {
            0
        } else {
            1 + (len - self.win_length) / self.hop_length
        }
    }

    /// Center frequency of each one-sided DFT bin.
    pub fn bin_freqs(&self, sample_rate: u32) -> Vec<f64> {
        (0..self.n_bins())
            .map(|k| k as f64 * sample_rate as f64 / self.n_fft as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Magnitude,
    Power,
    PsdDb,
    NormalizedPsdDb,
    Feature,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Magnitude => "magnitude",
            Domain::Power => "power",
            Domain::PsdDb => "psd_db",
            Domain::NormalizedPsdDb => "normalized_psd_db",
            Domain::Feature => "feature",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A frames x bins matrix tagged with the domain its values live in.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Array2<f64>,
    bin_freqs: Vec<f64>,
    domain: Domain,
}

impl Spectrogram {
    pub fn new(data: Array2<f64>, bin_freqs: Vec<f64>, domain: Domain) -> Result<Self> {
        if data.ncols() != bin_freqs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns but {} bin frequencies",
                data.ncols(),
                bin_freqs.len()
            )));
        }
        if bin_freqs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("bin frequencies must be strictly increasing"));
        }
        if matches!(domain, Domain::Magnitude | Domain::Power) && data.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid(format!(
                "{domain} spectrogram contains negative or NaN values"
            )));
        }
        Ok(Self {
            data,
            bin_freqs,
            domain,
        })
    }

    // Callers guarantee the invariants.
    pub(crate) fn from_parts(data: Array2<f64>, bin_freqs: Vec<f64>, domain: Domain) -> Self {
        debug_assert_eq!(data.ncols(), bin_freqs.len());
        Self {
            data,
            bin_freqs,
            domain,
        }
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn bin_freqs(&self) -> &[f64] {
        &self.bin_freqs
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.data.ncols()
    }

    pub(crate) fn expect_domain(&self, expected: Domain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::DomainMismatch {
                expected: expected.name(),
                found: self.domain.name(),
            });
        }
        Ok(())
    }

    fn map(&self, domain: Domain, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.data.mapv(f), self.bin_freqs.clone(), domain)
    }
}

/// First-order pre-emphasis: `y[t] = x[t] - coeff * x[t-1]`, `y[0] = x[0]`.
pub fn pre_emphasize(audio: &AudioBuffer, coeff: f64) -> Result<AudioBuffer> {
    if !(0.0..1.0).contains(&coeff) {
        return Err(Error::invalid(format!(
            "pre-emphasis coefficient must be in [0, 1), got {coeff}"
        )));
    }
    let x = audio.samples();
    let mut out = Vec::with_capacity(x.len());
    out.push(x[0]);
    out.extend(x.windows(2).map(|w| w[1] - coeff * w[0]));
    AudioBuffer::new(out, audio.sample_rate())
}

/// Magnitude STFT without centering or padding.
pub fn stft(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let x = audio.samples();
    if x.len() < cfg.win_length {
        return Err(Error::InputTooShort {
            len: x.len(),
            needed: cfg.win_length,
        });
    }
    let n_frames = cfg.n_frames(x.len());
    let n_bins = cfg.n_bins();
    let window = cfg.window.coefficients(cfg.win_length);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut data = Array2::zeros((n_frames, n_bins));

    for (frame, mut row) in data.axis_iter_mut(Axis(0)).enumerate() {
        let start = frame * cfg.hop_length;
        for (slot, (s, w)) in buf.iter_mut().zip(x[start..start + cfg.win_length].iter().zip(&window)) {
            *slot = Complex::new(s * w, 0.0);
        }
        buf[cfg.win_length..].fill(Complex::new(0.0, 0.0));
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (out, c) in row.iter_mut().zip(&buf[..n_bins]) {
            *out = c.norm();
        }
    }
    Ok(Spectrogram::from_parts(
        data,
        cfg.bin_freqs(audio.sample_rate()),
        Domain::Magnitude,
    ))
}

pub fn power_spectrum(spec: &Spectrogram) -> Result<Spectrogram> {
    spec.expect_domain(Domain::Magnitude)?;
    Ok(spec.map(Domain::Power, |m| m * m))
}

/// `10 log10 |s / n|^2`, with zero magnitudes clamped to [`FLOOR_DB`].
pub fn psd_db(spec: &Spectrogram, n: usize) -> Result<Spectrogram> {
    spec.expect_domain(Domain::Magnitude)?;
    if n == 0 {
        return Err(Error::invalid("window size for PSD must be positive"));
    }
    let n = n as f64;
    let floor = 10f64.powf(FLOOR_DB / 20.0) * n;
    Ok(spec.map(Domain::PsdDb, |m| 20.0 * (m.max(floor) / n).log10()))
}

/// Same as [`psd_db`] but starting from power values (`|s|^2`).
pub fn psd_db_from_power(spec: &Spectrogram, n: usize) -> Result<Spectrogram> {
    spec.expect_domain(Domain::Power)?;
    if n == 0 {
        return Err(Error::invalid("window size for PSD must be positive"));
    }
    let n2 = (n as f64).powi(2);
    let floor = 10f64.powf(FLOOR_DB / 10.0) * n2;
    Ok(spec.map(Domain::PsdDb, |p| 10.0 * (p.max(floor) / n2).log10()))
}

/// Shift each frame so that its loudest bin sits at `reference_db` (96 dB SPL).
pub fn normalize_psd(spec: &Spectrogram, reference_db: f64) -> Result<Spectrogram> {
    spec.expect_domain(Domain::PsdDb)?;
    let mut data = spec.data.clone();
    for mut row in data.axis_iter_mut(Axis(0)) {
        let peak = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|p| reference_db - peak + p);
    }
    Ok(Spectrogram::from_parts(
        data,
        spec.bin_freqs.clone(),
        Domain::NormalizedPsdDb,
    ))
}

/// dB-domain sum of each bin with its immediate neighbours. Out-of-range
/// neighbours contribute zero power.
pub fn smooth_psd(spec: &Spectrogram) -> Result<Spectrogram> {
    spec.expect_domain(Domain::NormalizedPsdDb)?;
    let mut data = spec.data.clone();
    let mut powers = Vec::with_capacity(spec.n_bins());
    for (src, mut dst) in spec.data.axis_iter(Axis(0)).zip(data.axis_iter_mut(Axis(0))) {
        powers.clear();
        powers.extend(src.iter().map(|&db| db_to_power(db)));
        smooth_row(&powers, dst.as_slice_mut().expect("row-major"));
    }
    Ok(Spectrogram::from_parts(
        data,
        spec.bin_freqs.clone(),
        Domain::NormalizedPsdDb,
    ))
}

pub(crate) fn smooth_row(powers: &[f64], out: &mut [f64]) {
    let n = powers.len();
    for k in 0..n {
        let mut sum = powers[k];
        if k > 0 {
            sum += powers[k - 1];
        }
        if k + 1 < n {
            sum += powers[k + 1];
        }
        out[k] = power_to_db(sum);
    }
}

#[inline]
pub(crate) fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub(crate) fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn buf(samples: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(samples, 16_000).unwrap()
    }

    fn db_spec(rows: Vec<Vec<f64>>, domain: Domain) -> Spectrogram {
        let cols = rows[0].len();
        let flat: Vec<f64> = rows.concat();
        let data = Array2::from_shape_vec((flat.len() / cols, cols), flat).unwrap();
        Spectrogram::new(data, (0..cols).map(|k| k as f64 * 40.0).collect(), domain).unwrap()
    }

    #[test]
    fn audio_buffer_rejects_bad_input() {
        assert!(AudioBuffer::new(vec![], 16_000).is_err());
        assert!(AudioBuffer::new(vec![0.1], 0).is_err());
        assert!(AudioBuffer::new(vec![f64::NAN], 16_000).is_err());
    }

    #[test]
    fn pre_emphasis_examples() {
        let ones = buf(vec![1.0; 5]);
        let out = pre_emphasize(&ones, 0.97).unwrap();
        assert_eq!(out.samples()[0], 1.0);
        for s in &out.samples()[1..] {
            assert!((s - 0.03).abs() < 1e-15);
        }

        let alt = buf((0..6).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect());
        let out = pre_emphasize(&alt, 0.97).unwrap();
        let expected = [1.0, -1.97, 1.97, -1.97, 1.97, -1.97];
        for (a, b) in out.samples().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }

        assert!(pre_emphasize(&ones, 1.0).is_err());
    }

    #[test]
    fn stft_shape_and_errors() {
        let cfg = StftConfig::default();
        let spec = stft(&buf(vec![0.1; 400]), &cfg).unwrap();
        assert_eq!((spec.n_frames(), spec.n_bins()), (1, 201));
        assert_eq!(spec.bin_freqs()[1], 40.0);

        let err = stft(&buf(vec![0.1; 399]), &cfg).unwrap_err();
        assert!(err.to_string().contains("input too short"));

        let zeros = stft(&buf(vec![0.0; 1600]), &cfg).unwrap();
        assert!(zeros.data().iter().all(|&v| v == 0.0));
    }

    fn naive_dft_magnitudes(frame: &[f64], n_fft: usize) -> Vec<f64> {
        (0..n_fft / 2 + 1)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &x) in frame.iter().enumerate() {
                    let phase = -2.0 * PI * (k * n) as f64 / n_fft as f64;
                    re += x * phase.cos();
                    im += x * phase.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn stft_matches_naive_dft_on_sine() {
        let cfg = StftConfig::default();
        let k = 25;
        let f = k as f64 * 40.0;
        let samples: Vec<f64> = (0..800).map(|t| (2.0 * PI * f * t as f64 / 16_000.0).sin()).collect();
        let spec = stft(&buf(samples.clone()), &cfg).unwrap();
        let window = Window::Hann.coefficients(400);
        let windowed: Vec<f64> = samples[160..560].iter().zip(&window).map(|(s, w)| s * w).collect();
        let oracle = naive_dft_magnitudes(&windowed, 400);
        let row = spec.data().row(1);
        for (a, b) in row.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, k);
    }

    #[test]
    fn power_and_psd_examples() {
        let mag = db_spec(vec![vec![0.0, 3.0, 400.0, 40.0]], Domain::Magnitude);
        let pow = power_spectrum(&mag).unwrap();
        assert_eq!(pow.data().row(0).to_vec(), vec![0.0, 9.0, 160_000.0, 1600.0]);
        assert!(matches!(power_spectrum(&pow), Err(Error::DomainMismatch { .. })));

        let psd = psd_db(&mag, 400).unwrap();
        let row = psd.data().row(0);
        assert!((row[0] - FLOOR_DB).abs() < 1e-9);
        assert!(row[2].abs() < 1e-12);
        assert!((row[3] + 20.0).abs() < 1e-12);

        let via_power = psd_db_from_power(&pow, 400).unwrap();
        for (a, b) in via_power.data().iter().zip(psd.data().iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn normalize_examples() {
        let psd = db_spec(vec![vec![-20.0, -10.0, -30.0], vec![96.0, 10.0, 50.0]], Domain::PsdDb);
        let norm = normalize_psd(&psd, 96.0).unwrap();
        assert_eq!(norm.data(), &array![[86.0, 96.0, 76.0], [96.0, 10.0, 50.0]]);
    }

    #[test]
    fn smoothing_examples() {
        let flat = db_spec(vec![vec![90.0, 90.0, 90.0]], Domain::NormalizedPsdDb);
        let sm = smooth_psd(&flat).unwrap();
        assert!((sm.data()[[0, 1]] - 94.771_212_547_196_62).abs() < 1e-9);
        // edge bin sums only itself and one neighbour
        assert!((sm.data()[[0, 0]] - (90.0 + 10.0 * 2f64.log10())).abs() < 1e-9);

        let isolated = db_spec(vec![vec![FLOOR_DB, 90.0, FLOOR_DB]], Domain::NormalizedPsdDb);
        let sm = smooth_psd(&isolated).unwrap();
        assert!((sm.data()[[0, 1]] - 90.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn zero_coefficient_is_identity(xs in prop::collection::vec(-1.0f64..1.0, 1..200)) {
            let a = buf(xs);
            prop_assert_eq!(pre_emphasize(&a, 0.0).unwrap(), a);
        }

        #[test]
        fn frame_count_formula(len in 1usize..3000, win in 1usize..500, hop_frac in 0.01f64..1.0) {
            let hop = ((win as f64 * hop_frac) as usize).max(1);
            let cfg = StftConfig { win_length: win, hop_length: hop, n_fft: win + 7, window: Window::Hann };
            let audio = buf(vec![0.25; len]);
            match stft(&audio, &cfg) {
                Ok(spec) => {
                    prop_assert!(len >= win);
                    prop_assert_eq!(spec.n_frames(), 1 + (len - win) / hop);
                    prop_assert_eq!(spec.n_bins(), (win + 7) / 2 + 1);
                }
                Err(_) => prop_assert!(len < win),
            }
        }

        #[test]
        fn normalized_max_is_reference(row in prop::collection::vec(-150.0f64..50.0, 2..64)) {
            let psd = db_spec(vec![row.clone()], Domain::PsdDb);
            let norm = normalize_psd(&psd, 96.0).unwrap();
            let out = norm.data().row(0);
            let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((max - 96.0).abs() < 1e-9);
            for i in 1..row.len() {
                prop_assert!(((out[i] - out[0]) - (row[i] - row[0])).abs() < 1e-9);
            }
        }

        #[test]
        fn smoothing_never_lowers(row in prop::collection::vec(-200.0f64..96.0, 1..64)) {
            let spec = db_spec(vec![row], Domain::NormalizedPsdDb);
            let sm = smooth_psd(&spec).unwrap();
            for (a, b) in sm.data().iter().zip(spec.data().iter()) {
                prop_assert!(*a >= *b - 1e-12);
            }
        }

        #[test]
        fn tenfold_gain_shifts_psd_by_20db(xs in prop::collection::vec(-0.09f64..0.09, 400..900)) {
            let cfg = StftConfig::default();
            let a = buf(xs);
            let base = psd_db(&stft(&a, &cfg).unwrap(), 400).unwrap();
            let loud = psd_db(&stft(&a.scaled(10.0).unwrap(), &cfg).unwrap(), 400).unwrap();
            for (hi, lo) in loud.data().iter().zip(base.data().iter()) {
                if *lo > FLOOR_DB + 40.0 {
                    prop_assert!((hi - lo - 20.0).abs() < 1e-6);
                }
            }
        }
    }
}
