//! Output files are written to a temporary name and renamed into place, so
//! an interrupted command never leaves a truncated file behind.

use std::fs;
use std::path::{Path, PathBuf};

use kronml::{Error, Result};

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn temp_name(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

/// Runs `write` against a temporary path, then renames it to `path`.
pub fn atomically(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = temp_name(path);
    if let Err(e) = write(&tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    atomically(path, |tmp| fs::write(tmp, text).map_err(|e| Error::Io { path: tmp.to_path_buf(), source: e }))
}

/// FNV-1a over `bytes`, printed as a short content fingerprint.
pub fn fingerprint(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
