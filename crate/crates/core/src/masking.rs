//! Simultaneous frequency masking.
//!
//! Every bin acts as a masker. The threshold it induces on bin `j` is its
//! smoothed normalized level plus a bark-dependent offset plus a two-slope
//! spreading function; the global threshold power-sums all maskers with the
//! absolute threshold of hearing. Bins whose normalized level falls below
//! the global threshold are zeroed.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dsp::{db_to_power, normalize_psd, power_to_db, psd_db, psd_db_from_power, smooth_row, Domain, Spectrogram};
use crate::error::{Error, Result};
use crate::scales::{ath_db, hz_to_bark};

/// Lower-side spreading slope in dB per bark.
const LOWER_SLOPE: f64 = 27.0;

/// Sign convention for the bark distance in the spreading function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadConvention {
    /// `dz = maskee - masker`: 27 dB/bark towards lower frequencies and a
    /// level-dependent slope towards higher ones, both decaying.
    Standard,
    /// `db = masker - maskee` substituted verbatim into the piecewise form.
    /// Raises thresholds above the masker level away from it.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub spread_convention: SpreadConvention,
    pub spl_reference: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            spread_convention: SpreadConvention::Standard,
            spl_reference: 96.0,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spl_reference != 96.0 {
            return Err(Error::Config {
                path: "mask.spl_reference".into(),
                message: format!("must be 96 dB, got {}", self.spl_reference),
            });
        }
        Ok(())
    }
}

/// Offset between a masker's level and the threshold it induces at its own bark.
#[inline]
pub fn masking_offset(bark: f64) -> f64 {
    -6.025 - 0.275 * bark
}

/// Upper-side slope (dB per bark) for a masker at `level_db`.
#[inline]
pub fn masker_gain(level_db: f64) -> f64 {
    -27.0 + 0.37 * (level_db - 40.0).max(0.0)
}

pub fn spread_function(masker_bark: f64, maskee_bark: f64, masker_level_db: f64, cfg: &MaskConfig) -> f64 {
    match cfg.spread_convention {
        SpreadConvention::Standard => {
            let dz = maskee_bark - masker_bark;
            if dz < 0.0 {
                LOWER_SLOPE * dz
            } else {
                masker_gain(masker_level_db) * dz
            }
        }
        SpreadConvention::PaperLiteral => {
            let db = masker_bark - maskee_bark;
            if db > 0.0 {
                LOWER_SLOPE * db
            } else {
                masker_gain(masker_level_db) * db
            }
        }
    }
}

/// Frame-independent state for threshold computation on a fixed frequency grid.
#[derive(Debug, Clone)]
pub struct MaskingModel {
    barks: Vec<f64>,
    offsets: Vec<f64>,
    ath_db: Vec<f64>,
    ath_power: Vec<f64>,
    // 10^(SF/10) for maskee j below masker i, row i.
    lower_kernel: Array2<f64>,
    sign: f64,
    cfg: MaskConfig,
}

impl MaskingModel {
    pub fn new(bin_freqs: &[f64], cfg: &MaskConfig) -> Result<Self> {
        cfg.validate()?;
        if bin_freqs.is_empty() {
            return Err(Error::invalid("masking model needs at least one bin"));
        }
        if bin_freqs.windows(2).any(|w| !(w[0] < w[1])) || bin_freqs[0] < 0.0 {
            return Err(Error::invalid(
                "masking bin frequencies must be nonnegative and strictly increasing",
            ));
        }
        // ATH is undefined at 0 Hz; borrow the first positive frequency.
        let first_positive = bin_freqs
            .iter()
            .copied()
            .find(|&f| f > 0.0)
            .ok_or_else(|| Error::invalid("masking needs a positive bin frequency"))?;
        let ath = bin_freqs
            .iter()
            .map(|&f| ath_db(if f > 0.0 { f } else { first_positive }))
            .collect::<Result<Vec<_>>>()?;
        let barks: Vec<f64> = bin_freqs.iter().map(|&f| hz_to_bark(f)).collect();
        let sign = match cfg.spread_convention {
            SpreadConvention::Standard => 1.0,
            SpreadConvention::PaperLiteral => -1.0,
        };
        let n = barks.len();
        let mut lower_kernel = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..i {
                let dz = barks[j] - barks[i];
                lower_kernel[[i, j]] = db_to_power(sign * LOWER_SLOPE * dz);
            }
        }
        Ok(Self {
            offsets: barks.iter().map(|&b| masking_offset(b)).collect(),
            ath_power: ath.iter().map(|&a| db_to_power(a)).collect(),
            ath_db: ath,
            barks,
            lower_kernel,
            sign,
            cfg: *cfg,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.barks.len()
    }

    pub fn config(&self) -> &MaskConfig {
        &self.cfg
    }

    pub fn ath_db(&self) -> &[f64] {
        &self.ath_db
    }

    /// Global threshold for one frame of smoothed, normalized PSD (dB).
    pub fn thresholds_into(&self, smoothed: &[f64], theta: &mut [f64]) {
        let n = self.n_bins();
        assert_eq!(smoothed.len(), n);
        assert_eq!(theta.len(), n);
        let ln10_over_10 = std::f64::consts::LN_10 / 10.0;
        let mut acc = self.ath_power.clone();
        for i in 0..n {
            let level = smoothed[i];
            let power = db_to_power(level + self.offsets[i]);
            if power == 0.0 {
                continue;
            }
            let lower = self.lower_kernel.row(i);
            for j in 0..i {
                acc[j] += power * lower[j];
            }
            let rate = self.sign * masker_gain(level) * ln10_over_10;
            let bi = self.barks[i];
            acc[i] += power;
            for (a, &bj) in acc[i + 1..].iter_mut().zip(&self.barks[i + 1..]) {
                *a += power * (rate * (bj - bi)).exp();
            }
        }
        for (t, a) in theta.iter_mut().zip(&acc) {
            *t = power_to_db(*a);
        }
    }

    pub fn thresholds(&self, smoothed: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; self.n_bins()];
        self.thresholds_into(smoothed, &mut theta);
        theta
    }
}

/// Global masking threshold for one smoothed normalized PSD frame.
pub fn masking_threshold_matrix(frame: &[f64], bin_freqs: &[f64], cfg: &MaskConfig) -> Result<Vec<f64>> {
    if frame.len() != bin_freqs.len() {
        return Err(Error::DimensionMismatch(format!(
            "frame has {} bins, grid has {}",
            frame.len(),
            bin_freqs.len()
        )));
    }
    Ok(MaskingModel::new(bin_freqs, cfg)?.thresholds(frame))
}

/// Per-frame, per-bin global masking threshold in dB SPL.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskingThresholds {
    pub theta: Array2<f64>,
    pub bin_freqs: Vec<f64>,
}

impl MaskingThresholds {
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for row in self.theta.axis_iter(Axis(0)) {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Normalized PSD and global thresholds for each frame of a PSD spectrogram.
struct MaskAnalysis {
    normalized: Array2<f64>,
    theta: Array2<f64>,
}

fn analyse(psd: &Spectrogram, cfg: &MaskConfig) -> Result<MaskAnalysis> {
    let model = MaskingModel::new(psd.bin_freqs(), cfg)?;
    let normalized = normalize_psd(psd, cfg.spl_reference)?.into_data();
    let mut theta = Array2::zeros(normalized.raw_dim());
    let mut powers = vec![0.0; model.n_bins()];
    let mut smoothed = vec![0.0; model.n_bins()];
    for (row, mut out) in normalized.axis_iter(Axis(0)).zip(theta.axis_iter_mut(Axis(0))) {
        for (p, &db) in powers.iter_mut().zip(row) {
            *p = db_to_power(db);
        }
        smooth_row(&powers, &mut smoothed);
        model.thresholds_into(&smoothed, out.as_slice_mut().expect("row-major"));
    }
    Ok(MaskAnalysis { normalized, theta })
}

fn psd_of(spec: &Spectrogram, window_len: usize) -> Result<Spectrogram> {
    match spec.domain() {
        Domain::Magnitude => psd_db(spec, window_len),
        Domain::Power => psd_db_from_power(spec, window_len),
        other => Err(Error::DomainMismatch {
            expected: "magnitude or power",
            found: other.name(),
        }),
    }
}

/// Thresholds for a magnitude or power spectrogram computed with a
/// `window_len`-sample window.
pub fn compute_thresholds(spec: &Spectrogram, window_len: usize, cfg: &MaskConfig) -> Result<MaskingThresholds> {
    let analysis = analyse(&psd_of(spec, window_len)?, cfg)?;
    Ok(MaskingThresholds {
        theta: analysis.theta,
        bin_freqs: spec.bin_freqs().to_vec(),
    })
}

/// `true` where a cell is audible (normalized PSD at or above threshold).
pub fn audible_cells(spec: &Spectrogram, window_len: usize, cfg: &MaskConfig) -> Result<Array2<bool>> {
    let a = analyse(&psd_of(spec, window_len)?, cfg)?;
    Ok(ndarray::Zip::from(&a.normalized)
        .and(&a.theta)
        .map_collect(|&p, &t| p >= t))
}

/// Zero every cell whose normalized PSD falls below the global masking
/// threshold. Accepts magnitude or power input and keeps its domain.
pub fn apply_freq_mask(spec: &Spectrogram, window_len: usize, cfg: &MaskConfig) -> Result<Spectrogram> {
    let keep = audible_cells(spec, window_len, cfg)?;
    let data = ndarray::Zip::from(spec.data())
        .and(&keep)
        .map_collect(|&v, &k| if k { v } else { 0.0 });
    Ok(Spectrogram::from_parts(data, spec.bin_freqs().to_vec(), spec.domain()))
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use crate::dsp::{stft, AudioBuffer, StftConfig, FLOOR_DB};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct O(F^2) evaluation with a `powf` per term.
    fn oracle_thresholds(frame: &[f64], freqs: &[f64], cfg: &MaskConfig) -> Vec<f64> {
        let first_positive = freqs.iter().copied().find(|&f| f > 0.0).unwrap();
        (0..frame.len())
            .map(|j| {
                let f = if freqs[j] > 0.0 { freqs[j] } else { first_positive };
                let mut sum = 10f64.powf(ath_db(f).unwrap() / 10.0);
                for i in 0..frame.len() {
                    let bi = hz_to_bark(freqs[i]);
                    let bj = hz_to_bark(freqs[j]);
                    let t = frame[i] + masking_offset(bi) + spread_function(bi, bj, frame[i], cfg);
                    sum += 10f64.powf(t / 10.0);
                }
                10.0 * sum.log10()
            })
            .collect()
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64 * 125.0).collect()
    }

    #[test]
    fn offset_and_gain_examples() {
        assert_eq!(masking_offset(0.0), -6.025);
        assert!((masking_offset(10.0) + 8.775).abs() < 1e-12);
        assert!((masking_offset(20.0) + 11.525).abs() < 1e-12);
        assert_eq!(masker_gain(20.0), -27.0);
        assert_eq!(masker_gain(40.0), -27.0);
        assert!((masker_gain(96.0) + 6.28).abs() < 1e-12);
    }

    #[test]
    fn spread_examples() {
        let std = MaskConfig::default();
        assert_eq!(spread_function(5.0, 5.0, 96.0, &std), 0.0);
        assert!((spread_function(5.0, 4.0, 96.0, &std) + 27.0).abs() < 1e-12);
        assert!((spread_function(5.0, 6.0, 96.0, &std) + 6.28).abs() < 1e-12);

        let lit = MaskConfig {
            spread_convention: SpreadConvention::PaperLiteral,
            ..MaskConfig::default()
        };
        assert!((spread_function(5.0, 4.0, 96.0, &lit) - 27.0).abs() < 1e-12);
        assert!((spread_function(5.0, 6.0, 96.0, &lit) - 6.28).abs() < 1e-12);
    }

    #[test]
    fn spl_reference_is_fixed() {
        let cfg = MaskConfig {
            spl_reference: 90.0,
            ..MaskConfig::default()
        };
        assert!(MaskingModel::new(&grid(8), &cfg).is_err());
    }

    #[test]
    fn floor_frame_gives_ath() {
        let freqs = grid(64);
        let theta = masking_threshold_matrix(&vec![FLOOR_DB; 64], &freqs, &MaskConfig::default()).unwrap();
        for (j, t) in theta.iter().enumerate() {
            let f = if j == 0 { freqs[1] } else { freqs[j] };
            assert!((t - ath_db(f).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn single_masker_matches_oracle() {
        let freqs = grid(64);
        let mut frame = vec![FLOOR_DB; 64];
        frame[8] = 96.0;
        let cfg = MaskConfig::default();
        let theta = masking_threshold_matrix(&frame, &freqs, &cfg).unwrap();
        let oracle = oracle_thresholds(&frame, &freqs, &cfg);
        for (a, b) in theta.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(theta[8] >= 96.0 + masking_offset(hz_to_bark(freqs[8])) - 1e-9);
    }

    #[test]
    fn louder_masker_raises_every_threshold() {
        let freqs = grid(64);
        let cfg = MaskConfig::default();
        let mut frame = vec![FLOOR_DB; 64];
        frame[20] = 80.0;
        let quiet = masking_threshold_matrix(&frame, &freqs, &cfg).unwrap();
        frame[20] = 96.0;
        let loud = masking_threshold_matrix(&frame, &freqs, &cfg).unwrap();
        for (q, l) in quiet.iter().zip(&loud) {
            assert!(l >= q);
        }
    }

    #[test]
    fn random_frames_match_oracle_both_conventions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let freqs = grid(64);
        for convention in [SpreadConvention::Standard, SpreadConvention::PaperLiteral] {
            let cfg = MaskConfig {
                spread_convention: convention,
                ..MaskConfig::default()
            };
            let model = MaskingModel::new(&freqs, &cfg).unwrap();
            for _ in 0..20 {
                let frame: Vec<f64> = (0..64).map(|_| rng.gen_range(-20.0..100.0)).collect();
                let fast = model.thresholds(&frame);
                let slow = oracle_thresholds(&frame, &freqs, &cfg);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-9, "{convention:?}: {a} vs {b}");
                }
            }
        }
    }

    fn tone(freqs_amps: &[(f64, f64)], len: usize) -> AudioBuffer {
        let samples = (0..len)
            .map(|t| {
                freqs_amps
                    .iter()
                    .map(|(f, a)| a * (2.0 * std::f64::consts::PI * f * t as f64 / 16_000.0).sin())
                    .sum()
            })
            .collect();
        AudioBuffer::new(samples, 16_000).unwrap()
    }

    #[test]
    fn silence_stays_silent() {
        let spec = stft(
            &AudioBuffer::new(vec![0.0; 1200], 16_000).unwrap(),
            &StftConfig::default(),
        )
        .unwrap();
        let out = apply_freq_mask(&spec, 400, &MaskConfig::default()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_tone_survives() {
        let audio = tone(&[(1000.0, 0.5)], 4000);
        let spec = stft(&audio, &StftConfig::default()).unwrap();
        let out = apply_freq_mask(&spec, 400, &MaskConfig::default()).unwrap();
        for f in 0..out.n_frames() {
            assert_eq!(out.data()[[f, 25]], spec.data()[[f, 25]]);
        }
    }

    #[test]
    fn quiet_neighbour_is_masked() {
        let audio = tone(&[(1000.0, 1.0), (1120.0, 0.01)], 4000);
        assert!(hz_to_bark(1120.0) - hz_to_bark(1000.0) < 1.0);
        let spec = stft(&audio, &StftConfig::default()).unwrap();
        let out = apply_freq_mask(&spec, 400, &MaskConfig::default()).unwrap();
        for f in 0..out.n_frames() {
            assert!(spec.data()[[f, 28]] > 0.0);
            assert_eq!(out.data()[[f, 28]], 0.0);
            assert_eq!(out.data()[[f, 25]], spec.data()[[f, 25]]);
        }
    }

    #[test]
    fn thresholds_never_below_ath() {
        let audio = tone(&[(300.0, 0.3), (2500.0, 0.2), (6000.0, 0.05)], 3200);
        let spec = stft(&audio, &StftConfig::default()).unwrap();
        let th = compute_thresholds(&spec, 400, &MaskConfig::default()).unwrap();
        let model = MaskingModel::new(spec.bin_freqs(), &MaskConfig::default()).unwrap();
        for row in th.theta.axis_iter(Axis(0)) {
            for (t, a) in row.iter().zip(model.ath_db()) {
                assert!(*t >= a - 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn raising_levels_never_lowers_thresholds(
            frame in prop::collection::vec(-50.0f64..96.0, 32),
            bumps in prop::collection::vec(0.0f64..10.0, 32),
        ) {
            let freqs = grid(32);
            let model = MaskingModel::new(&freqs, &MaskConfig::default()).unwrap();
            let before = model.thresholds(&frame);
            let raised: Vec<f64> = frame.iter().zip(&bumps).map(|(a, b)| a + b).collect();
            let after = model.thresholds(&raised);
            for (b, a) in before.iter().zip(&after) {
                prop_assert!(*a >= *b - 1e-9);
            }
        }

        #[test]
        fn output_is_zero_or_input(xs in prop::collection::vec(-0.5f64..0.5, 800..1400)) {
            let spec = stft(&AudioBuffer::new(xs, 16_000).unwrap(), &StftConfig::default()).unwrap();
            let out = apply_freq_mask(&spec, 400, &MaskConfig::default()).unwrap();
            for (o, i) in out.data().iter().zip(spec.data().iter()) {
                prop_assert!(*o == 0.0 || o == i);
            }
            for (orow, irow) in out.data().axis_iter(Axis(0)).zip(spec.data().axis_iter(Axis(0))) {
                let eo: f64 = orow.iter().map(|v| v * v).sum();
                let ei: f64 = irow.iter().map(|v| v * v).sum();
                prop_assert!(eo <= ei);
            }
        }
    }
}
