use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

/// Content-addressed store of stitched panoramas keyed by `(panoid, zoom)`.
///
/// Entries are PNG files named by the SHA-256 of the key. Writes go through a
/// temporary file and a no-clobber rename, so concurrent writers of the same
/// key leave exactly one complete artifact.
#[derive(Debug, Clone)]
pub struct PanoramaCache {
    dir: PathBuf,
}

impl PanoramaCache {
    /// Opens (creating if needed) a cache directory and checks it is writable.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("cache directory {}: {e}", dir.display())))?;
        NamedTempFile::new_in(&dir)
            .and_then(|mut f| f.write_all(b"probe"))
            .map_err(|e| Error::Config(format!("cache directory {} is not writable: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(panoid: &str, zoom: u32) -> String {
        let mut h = Sha256::new();
        h.update(panoid.as_bytes());
        h.update([0u8]);
        h.update(zoom.to_le_bytes());
        hex::encode(h.finalize())
    }

    pub fn path_for(&self, panoid: &str, zoom: u32) -> PathBuf {
        self.dir.join(format!("{}.png", Self::key(panoid, zoom)))
    }

    pub fn lookup_bytes(&self, panoid: &str, zoom: u32) -> Result<Option<Vec<u8>>> {
        let path = self.path_for(panoid, zoom);
        match fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Stores already-encoded bytes. Idempotent: an existing entry is kept.
    pub fn store_bytes(&self, panoid: &str, zoom: u32, bytes: &[u8]) -> Result<()> {
        let path = self.path_for(panoid, zoom);
        if path.exists() {
            return Ok(());
        }
        let mut tmp = NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(()),
            Err(e) if path.exists() => {
                drop(e);
                Ok(())
            }
            Err(e) => Err(Error::io(path, e.error)),
        }
    }

    pub fn store(&self, panoid: &str, zoom: u32, raster: &RgbImage) -> Result<()> {
        self.store_bytes(panoid, zoom, &encode_png(raster)?)
    }

    pub fn lookup(&self, panoid: &str, zoom: u32) -> Result<Option<RgbImage>> {
        self.lookup_bytes(panoid, zoom)?
            .map(|b| Ok(image::load_from_memory_with_format(&b, ImageFormat::Png)?.into_rgb8()))
            .transpose()
    }
}

pub fn encode_png(raster: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    raster.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}
