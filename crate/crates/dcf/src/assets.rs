//! Color Names lookup asset: 32768 x 10 little-endian `f32`, row `r5 << 10 |
//! g5 << 5 | b5`.

use std::path::{Path, PathBuf};

use deform_dcf_core::features::{ColorNamesTable, COLORNAMES_CHANNELS, COLORNAMES_ENTRIES};

use crate::error::{Error, Result};

/// Directory holding the data assets; overrides the bundled one.
pub const ASSETS_ENV: &str = "DEFORM_DCF_ASSETS";
pub const COLORNAMES_FILE: &str = "colornames.bin";
pub const COLORNAMES_BYTES: usize = COLORNAMES_ENTRIES * COLORNAMES_CHANNELS * 4;

pub fn bundled_assets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

pub fn assets_dir() -> PathBuf {
    std::env::var_os(ASSETS_ENV).map_or_else(bundled_assets_dir, PathBuf::from)
}

/// An explicit path wins; otherwise the table inside [`assets_dir`].
pub fn colornames_path(explicit: Option<&Path>) -> PathBuf {
    explicit.map_or_else(|| assets_dir().join(COLORNAMES_FILE), Path::to_path_buf)
}

pub fn load_colornames(path: impl AsRef<Path>) -> Result<ColorNamesTable> {
    let path = path.as_ref();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::Config(format!("color names table not found at {}", path.display())));
        }
        Err(e) => return Err(Error::Io { path: path.into(), source: e }),
    };
    if bytes.len() != COLORNAMES_BYTES {
        return Err(Error::Format {
            path: path.into(),
            offset: bytes.len().min(COLORNAMES_BYTES) as u64,
            message: format!("table needs {COLORNAMES_BYTES} bytes, found {}", bytes.len()),
        });
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(ColorNamesTable::new(data)?)
}

pub fn colornames_bytes(table: &ColorNamesTable) -> Vec<u8> {
    table.data().iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn save_colornames(path: impl AsRef<Path>, table: &ColorNamesTable) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, colornames_bytes(table)).map_err(Error::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_matches_generator() {
        let table = load_colornames(bundled_assets_dir().join(COLORNAMES_FILE)).unwrap();
        assert_eq!(table, ColorNamesTable::generated());
    }

    #[test]
    fn missing_table_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_colornames(dir.path().join("nope.bin")).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        let short = dir.path().join("short.bin");
        std::fs::write(&short, [0u8; 40]).unwrap();
        assert!(matches!(load_colornames(&short), Err(Error::Format { .. })));
    }

    #[test]
    fn explicit_path_wins() {
        assert_eq!(colornames_path(Some(Path::new("/x/t.bin"))), PathBuf::from("/x/t.bin"));
        assert!(colornames_path(None).ends_with(COLORNAMES_FILE));
    }
}
