//! The nine built-in pipelines.

use ndarray::{Array2, Axis};

use super::analysis::Analysis;
use super::config::FeatureKind;
use super::dct::DctII;
use super::registry::FeaturePipeline;
use crate::dsp::{Domain, Spectrogram};
use crate::error::Result;
use crate::filterbank::project;
use crate::masking::apply_freq_mask;
use crate::pnc::{power_normalized_coefficients, short_time_power_from_spectrum};

fn log_floor(data: &Array2<f64>, floor: f64) -> Array2<f64> {
    data.mapv(|v| v.max(floor).ln())
}

fn cube_root(data: &Array2<f64>) -> Array2<f64> {
    data.mapv(f64::cbrt)
}

fn rectified_cube_root(data: &Array2<f64>) -> Array2<f64> {
    data.mapv(|v| v.max(0.0).cbrt())
}

fn cepstra(data: &Array2<f64>, n_out: usize) -> Result<Array2<f64>> {
    let dct = DctII::new(data.ncols(), n_out)?;
    let mut out = Array2::zeros((data.nrows(), n_out));
    for (src, mut dst) in data.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        let coeffs = dct.forward(src.as_slice().expect("row-major"));
        dst.iter_mut().zip(coeffs).for_each(|(d, c)| *d = c);
    }
    Ok(out)
}

fn log_mel<'s>(a: &'s Analysis<'_>) -> Result<&'s Array2<f64>> {
    a.log_mel_with(|| {
        let mel = project(a.power()?.data(), a.mel_bank()?)?;
        Ok(log_floor(&mel, a.config().log_floor))
    })
}

fn pnc<'s>(a: &'s Analysis<'_>) -> Result<&'s Array2<f64>> {
    a.pnc_with(|| {
        let p = short_time_power_from_spectrum(a.emphasized_power()?.data(), a.gammatone_sq_bank()?)?;
        power_normalized_coefficients(&p, &a.config().pnc)
    })
}

/// stft -> power -> log
pub struct LogSpec;

impl FeaturePipeline for LogSpec {
    fn kind(&self) -> FeatureKind {
        FeatureKind::LogSpec
    }

    fn graph(&self) -> &'static str {
        "stft -> power -> log"
    }

    fn compute(&self, a: &Analysis<'_>) -> Result<Array2<f64>> {
        Ok(log_floor(a.power()?.data(), a.config().log_floor))
    }
}

pub struct LogMelSpec;

impl FeaturePipeline for LogMelSpec {
    fn kind(&self) -> FeatureKind {
        FeatureKind::LogMelSpec
    }

    fn graph(&self) -> &'static str {
        "stft -> power -> mel -> log"
    }

    fn compute(&self, a: &Analysis<'_>) -> Result<Array2<f64>> {
        Ok(log_mel(a)?.clone())
    }
}

pub struct Mfcc;

impl FeaturePipeline for Mfcc {
    fn kind(&self) -> FeatureKind {
        FeatureKind::Mfcc
    }

    fn graph(&self) -> &'static str {
        "stft -> power -> mel -> log -> dct"
    }

    fn compute(&self, a: &Analysis<'_>) -> Result<Array2<f64>> {
        cepstra(log_mel(a)?, a.config().n_ceps())
    }
}

pub struct GammSpec;

impl FeaturePipeline for GammSpec {
    fn kind(&self) -> FeatureKind {
        FeatureKind::GammSpec
    }

    fn graph(&self) -> &'static str {
        "stft -> power -> gammatone -> cbrt"
    }

    fn compute(&self, a: &Analysis<'_>) -> Result<Array2<f64>> {
        Ok(cube_root(a.gammatone_power()?))
    }
}

/// Masking runs on the magnitude STFT; power and cube root follow.
pub struct FreqMask;

impl FeaturePipeline for FreqMask {
    fn kind(&self) -> FeatureKind {
        FeatureKind::FreqMask
    }

    fn graph(&self) -> &'static str {
        "stft -> mask -> power -> cbrt"
    }

    fn compute(&self, a: &Analysis<'_>) -> Result<Array2<f64>> {
        let cfg = a.config();
        let masked = apply_freq_mask(a.magnitude()?, cfg.stft.win_length, &cfg.mask)?;
        Ok(masked.data().mapv(|m| (m * m).cbrt()))
    }
}

/// Masking runs on the gammatone channel powers, with the channel center
/// frequencies standing in for bin frequencies.
pub struct GammFreqMask;

impl FeaturePipeline for GammFreqMask {
    fn kind(&self) -> FeatureKind {
        FeatureKind::GammFreqMask
    }

    fn graph(&self) -> &'static str {
        "stft -> power -> gammatone -> mask -> cbrt"
    }

    fn compute(&self, a: &Analysis<'_>) -> Result<Array2<f64>> {
        let cfg = a.config();
        let channels = Spectrogram::new(
            a.gammatone_power()?.clone(),
            a.gammatone_bank()?.center_freqs().to_vec(),
            Domain::Power,
        )?;
        let masked = apply_freq_mask(&channels, cfg.stft.win_length, &cfg.mask)?;
        Ok(cube_root(masked.data()))
    }
}

pub struct Pnc;

impl FeaturePipeline for Pnc {
    fn kind(&self) -> FeatureKind {
        FeatureKind::Pnc
    }

    fn graph(&self) -> &'static str {
        "pre-emphasis -> stft -> power -> gammatone^2 -> medium-time -> ans -> temporal mask -> smoothing -> mean norm -> pow(1/15)"
    }

    fn compute(&self, a: &Analysis<'_>) -> Result<Array2<f64>> {
        Ok(pnc(a)?.clone())
    }
}

pub struct Pncc;

impl FeaturePipeline for Pncc {
    fn kind(&self) -> FeatureKind {
        FeatureKind::Pncc
    }

    fn graph(&self) -> &'static str {
        "pnc -> dct"
    }

    fn compute(&self, a: &Analysis<'_>) -> Result<Array2<f64>> {
        cepstra(pnc(a)?, a.config().n_ceps())
    }
}

pub struct DogSpec;

impl FeaturePipeline for DogSpec {
    fn kind(&self) -> FeatureKind {
        FeatureKind::DogSpec
    }

    fn graph(&self) -> &'static str {
        "pre-emphasis -> stft -> power -> dog -> rectify -> cbrt"
    }

    fn compute(&self, a: &Analysis<'_>) -> Result<Array2<f64>> {
        let response = project(a.emphasized_power()?.data(), a.dog_bank()?)?;
        Ok(rectified_cube_root(&response))
    }
}
