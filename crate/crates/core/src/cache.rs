//! Content-addressed response cache: one file per key, written atomically.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// SHA-256 over length-prefixed parts, hex encoded. Length prefixes keep
/// `("ab", "c")` and `("a", "bc")` apart.
pub fn cache_key(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// First eight bytes of [`cache_key`]'s digest, for deriving RNG seeds.
pub(crate) fn key_u64(parts: &[&[u8]]) -> u64 {
    let hex = cache_key(parts);
    u64::from_str_radix(&hex[..16], 16).expect("hex digest")
}

/// Byte form of a temperature for hashing; `-0.0` and `0.0` coincide.
pub(crate) fn temperature_bytes(t: f64) -> [u8; 8] {
    let t = if t == 0.0 { 0.0 } else { t };
    t.to_bits().to_le_bytes()
}

#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    pub fn get(&self, key: &str) -> io::Result<Option<String>> {
        match fs::read_to_string(self.path_for(key)) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Write to a temporary file in the cache directory, then rename over the key.
    pub fn put(&self, key: &str, contents: &str) -> io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(contents.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path_for(key)).map_err(|e| e.error)?;
        Ok(())
    }
}
