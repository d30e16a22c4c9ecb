use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::masking::{MaskConfig, SpreadConvention};
use crate::pnc::PncConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    LogSpec,
    LogMelSpec,
    Mfcc,
    GammSpec,
    FreqMask,
    GammFreqMask,
    Pnc,
    Pncc,
    DogSpec,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 9] = [
        FeatureKind::LogSpec,
        FeatureKind::LogMelSpec,
        FeatureKind::Mfcc,
        FeatureKind::GammSpec,
        FeatureKind::FreqMask,
        FeatureKind::GammFreqMask,
        FeatureKind::Pnc,
        FeatureKind::Pncc,
        FeatureKind::DogSpec,
    ];

    /// Ordinal stored in AFM1 headers.
    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn from_id(id: u32) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    /// Lowercase registry key, also used in file names.
    pub fn key(self) -> &'static str {
        match self {
            FeatureKind::LogSpec => "logspec",
            FeatureKind::LogMelSpec => "logmelspec",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::GammSpec => "gammspec",
            FeatureKind::FreqMask => "freqmask",
            FeatureKind::GammFreqMask => "gammfreqmask",
            FeatureKind::Pnc => "pnc",
            FeatureKind::Pncc => "pncc",
            FeatureKind::DogSpec => "dogspec",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            FeatureKind::LogSpec => "LogSpec",
            FeatureKind::LogMelSpec => "LogMelSpec",
            FeatureKind::Mfcc => "MFCC",
            FeatureKind::GammSpec => "GammSpec",
            FeatureKind::FreqMask => "FreqMask",
            FeatureKind::GammFreqMask => "GammFreqMask",
            FeatureKind::Pnc => "PNC",
            FeatureKind::Pncc => "PNCC",
            FeatureKind::DogSpec => "DoGSpec",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.key() == lower)
            .ok_or_else(|| Error::invalid(format!("unknown feature kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    pub sample_rate: u32,
    pub stft: StftConfig,
    pub n_filters: usize,
    /// Cepstral dimensions for MFCC/PNCC; defaults to `n_filters`.
    pub n_ceps: Option<usize>,
    pub f_min: f64,
    /// Defaults to Nyquist.
    pub f_max: Option<f64>,
    pub dog_alpha: f64,
    pub pre_emph: f64,
    pub mask: MaskConfig,
    pub pnc: PncConfig,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            kind: FeatureKind::LogMelSpec,
            sample_rate: 16_000,
            stft: StftConfig::default(),
            n_filters: 80,
            n_ceps: None,
            f_min: 20.0,
            f_max: None,
            dog_alpha: 2.0,
            pre_emph: 0.97,
            mask: MaskConfig::default(),
            pnc: PncConfig::default(),
            log_floor: 1e-10,
        }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl FeatureConfig {
    pub fn with_kind(&self, kind: FeatureKind) -> Self {
        Self { kind, ..self.clone() }
    }

    /// Switch both disputed conventions to their literal readings: the
    /// spreading-function sign and `mu_t = 2`.
    pub fn paper_literal(mut self) -> Self {
        self.mask.spread_convention = SpreadConvention::PaperLiteral;
        self.pnc.mu_t = PncConfig::PAPER_LITERAL_MU_T;
        self
    }

    pub fn n_ceps(&self) -> usize {
        self.n_ceps.unwrap_or(self.n_filters)
    }

    pub fn f_max(&self) -> f64 {
        self.f_max.unwrap_or(self.sample_rate as f64 / 2.0)
    }

    /// Copy with every optional field filled in.
    pub fn resolved(&self) -> Self {
        Self {
            n_ceps: Some(self.n_ceps()),
            f_max: Some(self.f_max()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(config_error("sample_rate", "must be positive"));
        }
        self.stft.validate().map_err(|e| config_error("stft", e.to_string()))?;
        if self.n_filters == 0 {
            return Err(config_error("n_filters", "must be at least 1"));
        }
        if self.n_ceps() == 0 || self.n_ceps() > self.n_filters {
            return Err(config_error(
                "n_ceps",
                format!("must be in 1..={}, got {}", self.n_filters, self.n_ceps()),
            ));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max()) {
            return Err(config_error(
                "f_min",
                format!("must be in [0, f_max), got {}", self.f_min),
            ));
        }
        if !(self.f_max() <= nyquist) {
            return Err(config_error(
                "f_max",
                format!("must not exceed Nyquist ({nyquist}), got {}", self.f_max()),
            ));
        }
        if !(self.dog_alpha > 1.0) || !self.dog_alpha.is_finite() {
            return Err(config_error(
                "dog_alpha",
                format!("surround must be wider than center, got {}", self.dog_alpha),
            ));
        }
        if !(0.0..1.0).contains(&self.pre_emph) {
            return Err(config_error(
                "pre_emph",
                format!("must be in [0, 1), got {}", self.pre_emph),
            ));
        }
        if !(self.log_floor > 0.0) || !self.log_floor.is_finite() {
            return Err(config_error("log_floor", "must be positive"));
        }
        self.mask.validate()?;
        self.pnc.validate()?;
        Ok(())
    }

    /// Human-readable remarks about unusual but accepted settings.
    pub fn notices(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if self.pnc.mu_t == PncConfig::PAPER_LITERAL_MU_T {
            notes.push("paper-literal mu_t: pnc.mu_t = 2 lets masked frames exceed the decayed peak power".to_string());
        } else if self.pnc.mu_t > self.pnc.lambda_t {
            notes.push(format!(
                "pnc.mu_t = {} exceeds lambda_t = {}; masked frames can exceed the decayed peak",
                self.pnc.mu_t, self.pnc.lambda_t
            ));
        }
        if self.mask.spread_convention == SpreadConvention::PaperLiteral {
            notes.push(
                "paper-literal spreading function: thresholds rise above the masker level away from it".to_string(),
            );
        }
        notes
    }

    /// First 16 hex digits of the SHA-256 of the resolved config's JSON.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(&self.resolved()).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
