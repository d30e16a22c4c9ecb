use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureConfig;

/// A validated config with every default filled in, plus remarks about
/// accepted-but-unusual settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: FeatureConfig,
    pub notices: Vec<String>,
}

impl LoadedConfig {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.config).expect("config serializes")
    }
}

/// Strict parse: unknown keys and type mismatches fail with their JSON path.
pub fn parse_config(json: &str) -> Result<LoadedConfig> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let config: FeatureConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            path: if path == "." { "$".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    config.validate()?;
    let notices = config.notices();
    Ok(LoadedConfig {
        config: config.resolved(),
        notices,
    })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
