use std::sync::OnceLock;

use ndarray::Array2;

use crate::dsp::{power_spectrum, pre_emphasize, stft, AudioBuffer, Spectrogram};
use crate::error::Result;
use crate::features::config::FeatureConfig;
use crate::filterbank::{
    dog_filterbank_for_bins, gammatone_filterbank_for_bins, mel_filterbank_for_bins, project, FilterBank,
};

/// Lazily computed intermediates shared by the pipelines of one utterance.
///
/// Every value is computed at most once and never mutated afterwards, so a
/// pipeline reading a cached value sees exactly what it would have computed
/// itself.
pub struct Analysis<'a> {
    audio: &'a AudioBuffer,
    cfg: FeatureConfig,
    magnitude: OnceLock<Spectrogram>,
    power: OnceLock<Spectrogram>,
    emphasized_power: OnceLock<Spectrogram>,
    mel: OnceLock<FilterBank>,
    gammatone: OnceLock<FilterBank>,
    gammatone_sq: OnceLock<FilterBank>,
    dog: OnceLock<FilterBank>,
    gammatone_power: OnceLock<Array2<f64>>,
    log_mel: OnceLock<Array2<f64>>,
    pnc: OnceLock<Array2<f64>>,
}

fn cached<T>(cell: &OnceLock<T>, init: impl FnOnce() -> Result<T>) -> Result<&T> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let value = init()?;
    Ok(cell.get_or_init(|| value))
}

impl<'a> Analysis<'a> {
    pub fn new(audio: &'a AudioBuffer, cfg: &FeatureConfig) -> Self {
        Self {
            audio,
            cfg: cfg.resolved(),
            magnitude: OnceLock::new(),
            power: OnceLock::new(),
            emphasized_power: OnceLock::new(),
            mel: OnceLock::new(),
            gammatone: OnceLock::new(),
            gammatone_sq: OnceLock::new(),
            dog: OnceLock::new(),
            gammatone_power: OnceLock::new(),
            log_mel: OnceLock::new(),
            pnc: OnceLock::new(),
        }
    }

    pub fn audio(&self) -> &AudioBuffer {
        self.audio
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    fn bin_freqs(&self) -> Vec<f64> {
        self.cfg.stft.bin_freqs(self.cfg.sample_rate)
    }

    pub fn magnitude(&self) -> Result<&Spectrogram> {
        cached(&self.magnitude, || stft(self.audio, &self.cfg.stft))
    }

    pub fn power(&self) -> Result<&Spectrogram> {
        cached(&self.power, || power_spectrum(self.magnitude()?))
    }

    /// Power spectrum of the pre-emphasized signal.
    pub fn emphasized_power(&self) -> Result<&Spectrogram> {
        cached(&self.emphasized_power, || {
            let emphasized = pre_emphasize(self.audio, self.cfg.pre_emph)?;
            power_spectrum(&stft(&emphasized, &self.cfg.stft)?)
        })
    }

    pub fn mel_bank(&self) -> Result<&FilterBank> {
        cached(&self.mel, || {
            mel_filterbank_for_bins(self.cfg.n_filters, &self.bin_freqs(), self.cfg.f_min, self.cfg.f_max())
        })
    }

    pub fn gammatone_bank(&self) -> Result<&FilterBank> {
        cached(&self.gammatone, || {
            gammatone_filterbank_for_bins(
                self.cfg.n_filters,
                &self.bin_freqs(),
                self.cfg.f_min,
                self.cfg.f_max(),
                false,
            )
        })
    }

    pub fn gammatone_sq_bank(&self) -> Result<&FilterBank> {
        cached(&self.gammatone_sq, || {
            gammatone_filterbank_for_bins(
                self.cfg.n_filters,
                &self.bin_freqs(),
                self.cfg.f_min,
                self.cfg.f_max(),
                true,
            )
        })
    }

    pub fn dog_bank(&self) -> Result<&FilterBank> {
        cached(&self.dog, || {
            dog_filterbank_for_bins(
                self.cfg.n_filters,
                &self.bin_freqs(),
                self.cfg.f_min,
                self.cfg.f_max(),
                self.cfg.dog_alpha,
            )
        })
    }

    /// Normalized-gammatone projection of the power spectrum.
    pub fn gammatone_power(&self) -> Result<&Array2<f64>> {
        cached(&self.gammatone_power, || {
            project(self.power()?.data(), self.gammatone_bank()?)
        })
    }

    pub(crate) fn log_mel_with(&self, compute: impl FnOnce() -> Result<Array2<f64>>) -> Result<&Array2<f64>> {
        cached(&self.log_mel, compute)
    }

    pub(crate) fn pnc_with(&self, compute: impl FnOnce() -> Result<Array2<f64>>) -> Result<&Array2<f64>> {
        cached(&self.pnc, compute)
    }
}
