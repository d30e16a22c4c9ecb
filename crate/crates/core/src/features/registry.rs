use std::collections::BTreeMap;
use std::sync::OnceLock;

use ndarray::Array2;

use super::analysis::Analysis;
use super::config::FeatureKind;
use super::pipelines;
use crate::error::{Error, Result};

/// One acoustic feature: a function of the shared per-utterance analysis.
pub trait FeaturePipeline: Send + Sync {
    fn kind(&self) -> FeatureKind;

    /// Registry key. Defaults to the kind's lowercase name.
    fn name(&self) -> &'static str {
        self.kind().key()
    }

    /// Stage chain, for logs and `--help` output.
    fn graph(&self) -> &'static str;

    fn compute(&self, analysis: &Analysis<'_>) -> Result<Array2<f64>>;
}

#[derive(Default)]
pub struct FeatureRegistry {
    pipelines: BTreeMap<&'static str, Box<dyn FeaturePipeline>>,
}

impl FeatureRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        reg.register(Box::new(pipelines::LogSpec));
        reg.register(Box::new(pipelines::LogMelSpec));
        reg.register(Box::new(pipelines::Mfcc));
        reg.register(Box::new(pipelines::GammSpec));
        reg.register(Box::new(pipelines::FreqMask));
        reg.register(Box::new(pipelines::GammFreqMask));
        reg.register(Box::new(pipelines::Pnc));
        reg.register(Box::new(pipelines::Pncc));
        reg.register(Box::new(pipelines::DogSpec));
        reg
    }

    /// Adds `pipeline`, replacing any pipeline registered under the same name.
    pub fn register(&mut self, pipeline: Box<dyn FeaturePipeline>) -> Option<Box<dyn FeaturePipeline>> {
        self.pipelines.insert(pipeline.name(), pipeline)
    }

    pub fn get(&self, name: &str) -> Result<&dyn FeaturePipeline> {
        self.pipelines
            .get(name.to_ascii_lowercase().as_str())
            .map(|p| p.as_ref())
            .ok_or_else(|| Error::invalid(format!("no feature pipeline registered as `{name}`")))
    }

    pub fn for_kind(&self, kind: FeatureKind) -> Result<&dyn FeaturePipeline> {
        self.get(kind.key())
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.pipelines.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.pipelines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pipelines.is_empty()
    }
}

/// Process-wide registry of the built-in pipelines.
pub fn registry() -> &'static FeatureRegistry {
    static REGISTRY: OnceLock<FeatureRegistry> = OnceLock::new();
    REGISTRY.get_or_init(FeatureRegistry::with_builtins)
}
