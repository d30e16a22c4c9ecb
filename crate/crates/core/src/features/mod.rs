//! Feature pipelines assembled from the dsp, filterbank, masking and pnc
//! building blocks.
//!
//! Each feature kind is a [`FeaturePipeline`] registered by name in a
//! [`FeatureRegistry`]. Pipelines read shared intermediates (STFT, power
//! spectra, filterbanks) from an [`Analysis`], so [`extract_all`] computes
//! the STFT once per utterance while producing the same bits as calling
//! [`extract`] kind by kind.

mod analysis;
mod config;
mod dct;
mod pipelines;
mod registry;

use std::collections::BTreeMap;

use ndarray::Array2;

pub use analysis::Analysis;
pub use config::{FeatureConfig, FeatureKind};
pub use dct::{dct_ii, idct, DctII};
pub use registry::{registry, FeaturePipeline, FeatureRegistry};

use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Array2<f64>,
    pub kind: FeatureKind,
    /// Fingerprint of the resolved config that produced the matrix; empty
    /// when read back from a format that does not carry it.
    pub fingerprint: String,
}

impl FeatureMatrix {
    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dims(&self) -> usize {
        self.data.ncols()
    }
}

fn check_audio(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<()> {
    cfg.validate()?;
    if audio.sample_rate() != cfg.sample_rate {
        return Err(Error::invalid(format!(
            "audio is sampled at {} Hz but the config expects {} Hz (no resampling is done)",
            audio.sample_rate(),
            cfg.sample_rate
        )));
    }
    Ok(())
}

fn run(pipeline: &dyn FeaturePipeline, analysis: &Analysis<'_>, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    let data = pipeline.compute(analysis)?;
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "{} produced a non-finite value at cell {pos}",
            pipeline.name()
        )));
    }
    Ok(FeatureMatrix {
        data,
        kind: pipeline.kind(),
        fingerprint: cfg.fingerprint(),
    })
}

/// Compute `cfg.kind` for `audio` with the built-in registry.
pub fn extract(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    extract_with(registry(), audio, cfg)
}

pub fn extract_with(reg: &FeatureRegistry, audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    check_audio(audio, cfg)?;
    let pipeline = reg.for_kind(cfg.kind)?;
    run(pipeline, &Analysis::new(audio, cfg), cfg)
}

/// Every built-in kind from one shared analysis.
pub fn extract_all(audio: &AudioBuffer, base: &FeatureConfig) -> Result<BTreeMap<FeatureKind, FeatureMatrix>> {
    check_audio(audio, base)?;
    let analysis = Analysis::new(audio, base);
    let reg = registry();
    FeatureKind::ALL
        .into_iter()
        .map(|kind| {
            let cfg = base.with_kind(kind);
            run(reg.for_kind(kind)?, &analysis, &cfg).map(|m| (kind, m))
        })
        .collect()
}
