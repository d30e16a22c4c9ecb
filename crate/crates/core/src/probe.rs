//! Controlled noise injection and feature-space distortion probes.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};
use crate::features::{extract, FeatureConfig, FeatureKind};
use crate::metrics::{energy, snr_db_samples};

/// Accepted target SNR range in dB.
pub const SNR_RANGE_DB: std::ops::RangeInclusive<f64> = -100.0..=1000.0;

/// Cells whose absolute change exceeds this count as changed.
pub const CHANGE_TOLERANCE: f64 = 1e-6;

pub const PROBE_CSV_HEADER: &str = "feature,target_snr_db,achieved_snr_db,relative_distortion,changed_cell_fraction";

/// Standard normal samples from a ChaCha8 stream seeded with `seed`.
///
/// Uniforms `u1` in (0, 1] and `u2` in [0, 1) are turned into a pair of
/// normals with the Box-Muller transform
/// `sqrt(-2 ln u1) * (cos 2 pi u2, sin 2 pi u2)`.
pub fn gaussian_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(len + 1);
    while out.len() < len {
        let u1 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let phase = 2.0 * std::f64::consts::PI * u2;
        out.push(r * phase.cos());
        out.push(r * phase.sin());
    }
    out.truncate(len);
    out
}

pub fn white_noise(len: usize, sample_rate: u32, seed: u64) -> Result<AudioBuffer> {
    AudioBuffer::new(gaussian_noise(len, seed), sample_rate)
}

/// Result of mixing: the noisy signal and the scaled noise that was added.
#[derive(Debug, Clone)]
pub struct NoisyMix {
    pub noisy: AudioBuffer,
    pub scaled_noise: Vec<f64>,
    pub achieved_snr_db: f64,
}

fn check_target(target_snr_db: f64) -> Result<()> {
    if !SNR_RANGE_DB.contains(&target_snr_db) {
        return Err(Error::invalid(format!(
            "target SNR {target_snr_db} dB outside [{}, {}] dB",
            SNR_RANGE_DB.start(),
            SNR_RANGE_DB.end()
        )));
    }
    Ok(())
}

/// `clean + g * noise`, with `g` chosen to hit `target_snr_db`. The noise is
/// tiled or truncated to the length of `clean`.
pub fn add_noise_at_snr(clean: &AudioBuffer, noise: &AudioBuffer, target_snr_db: f64) -> Result<NoisyMix> {
    check_target(target_snr_db)?;
    let x = clean.samples();
    let signal_energy = energy(x);
    if signal_energy == 0.0 {
        return Err(Error::ZeroEnergy("clean signal"));
    }
    let tiled: Vec<f64> = noise.samples().iter().copied().cycle().take(x.len()).collect();
    let noise_energy = energy(&tiled);
    if noise_energy == 0.0 {
        return Err(Error::InfiniteSnr);
    }
    let gain = (signal_energy / (noise_energy * 10f64.powf(target_snr_db / 10.0))).sqrt();
    let scaled_noise: Vec<f64> = tiled.iter().map(|n| gain * n).collect();
    let achieved_snr_db = snr_db_samples(x, &scaled_noise)?;
    let noisy = AudioBuffer::new(
        x.iter().zip(&scaled_noise).map(|(s, n)| s + n).collect(),
        clean.sample_rate(),
    )?;
    Ok(NoisyMix {
        noisy,
        scaled_noise,
        achieved_snr_db,
    })
}

/// [`add_noise_at_snr`] with seeded Gaussian white noise.
pub fn add_white_noise_at_snr(clean: &AudioBuffer, target_snr_db: f64, seed: u64) -> Result<NoisyMix> {
    let noise = white_noise(clean.len(), clean.sample_rate(), seed)?;
    add_noise_at_snr(clean, &noise, target_snr_db)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub feature_kind: FeatureKind,
    pub target_snr_db: f64,
    pub achieved_snr_db: f64,
    /// `||F(noisy) - F(clean)||_F / ||F(clean)||_F`
    pub relative_distortion: f64,
    pub changed_cell_fraction: f64,
}

impl ProbeReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.feature_kind.key(),
            self.target_snr_db,
            self.achieved_snr_db,
            self.relative_distortion,
            self.changed_cell_fraction
        )
    }
}

pub fn reports_to_csv(reports: &[ProbeReport]) -> String {
    let mut out = String::new();
    writeln!(out, "{PROBE_CSV_HEADER}").unwrap();
    for r in reports {
        writeln!(out, "{}", r.csv_row()).unwrap();
    }
    out
}

/// Frobenius-relative distortion and fraction of changed cells.
pub fn feature_distortion(clean: &ndarray::Array2<f64>, noisy: &ndarray::Array2<f64>) -> Result<(f64, f64)> {
    if clean.dim() != noisy.dim() {
        return Err(Error::DimensionMismatch(format!(
            "clean features {:?}, noisy features {:?}",
            clean.dim(),
            noisy.dim()
        )));
    }
    let (mut diff, mut base, mut changed) = (0.0, 0.0, 0usize);
    for (c, n) in clean.iter().zip(noisy.iter()) {
        let d = n - c;
        diff += d * d;
        base += c * c;
        if d.abs() > CHANGE_TOLERANCE {
            changed += 1;
        }
    }
    let rel = if base > 0.0 {
        (diff / base).sqrt()
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok((rel, changed as f64 / clean.len().max(1) as f64))
}

/// One report per target SNR. The same seeded noise realization is scaled
/// for every target, so reports differ only in noise level.
pub fn probe_feature(
    clean: &AudioBuffer,
    cfg: &FeatureConfig,
    snr_list: &[f64],
    seed: u64,
) -> Result<Vec<ProbeReport>> {
    for &s in snr_list {
        check_target(s)?;
    }
    let noise = white_noise(clean.len(), clean.sample_rate(), seed)?;
    let reference = extract(clean, cfg)?;
    snr_list
        .iter()
        .map(|&target| {
            let mix = add_noise_at_snr(clean, &noise, target)?;
            let noisy = extract(&mix.noisy, cfg)?;
            let (relative_distortion, changed_cell_fraction) = feature_distortion(&reference.data, &noisy.data)?;
            Ok(ProbeReport {
                feature_kind: cfg.kind,
                target_snr_db: target,
                achieved_snr_db: mix.achieved_snr_db,
                relative_distortion,
                changed_cell_fraction,
            })
        })
        .collect()
}
