//! WAV ingestion, feature matrix serialization and config loading.

mod config;
mod matrix;
mod wav;

use std::io::Write;
use std::path::Path;

pub use config::{load_config, parse_config, LoadedConfig};
pub use matrix::{
    decode_afm1, decode_csv, encode_afm1, encode_csv, read_feature_matrix, write_feature_matrix, MatrixFormat,
    AFM1_MAGIC,
};
pub use wav::{encode_wav, parse_wav, read_wav, write_wav, SampleFormat, WavHeader};

use crate::error::{Error, Result};

/// Write `bytes` to a temporary file beside `path`, then rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let perms = std::fs::Permissions::from_mode(0o644);
        tmp.as_file()
            .set_permissions(perms)
            .map_err(|e| Error::io(tmp.path(), e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
