//! On-disk panorama cache: `root/panos/{pano_id}/meta.json` + `zoom{z}.png`.
//!
//! Files are written under temporary names and renamed into place, image
//! first and metadata last. A reader only trusts an entry whose final
//! `meta.json` and image are both present, so an interrupted write leaves
//! no entry rather than a partial one.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use super::{file_stem, IndexEntry};
use crate::error::{Error, Result};
use crate::panosphere::Panorama;
use crate::raster;

#[derive(Debug, Clone)]
pub struct PanoCache {
    root: PathBuf,
}

impl PanoCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn entry_dir(&self, pano_id: &str) -> PathBuf {
        self.root.join("panos").join(file_stem(pano_id))
    }

    pub fn image_path(&self, pano_id: &str, zoom: u8) -> PathBuf {
        self.entry_dir(pano_id).join(format!("zoom{zoom}.png"))
    }

    pub fn load(&self, pano_id: &str, zoom: u8) -> Result<Option<Panorama>> {
        let dir = self.entry_dir(pano_id);
        let meta_path = dir.join("meta.json");
        let image_path = self.image_path(pano_id, zoom);
        if !meta_path.is_file() || !image_path.is_file() {
            return Ok(None);
        }
        let entry: IndexEntry = serde_json::from_slice(&std::fs::read(&meta_path)?)?;
        let pixels = raster::load_rgb(&image_path)?;
        let mut meta = entry.to_meta()?;
        // meta.json records whichever zoom was written last
        (meta.width_px, meta.height_px) = pixels.dimensions();
        Ok(Some(Panorama::new(meta, pixels)?))
    }

    /// Writes an entry under temporary names; nothing is visible to readers
    /// until [`StagedEntry::publish`].
    pub fn stage(&self, pano: &Panorama, zoom: u8) -> Result<StagedEntry> {
        let write = || -> Result<StagedEntry> {
            let dir = self.entry_dir(&pano.meta.pano_id);
            std::fs::create_dir_all(&dir)?;
            let image_name = format!("zoom{zoom}.png");

            let mut image = NamedTempFile::new_in(&dir)?;
            image.write_all(&raster::encode_png(&pano.pixels)?)?;
            image.as_file().sync_all()?;

            let mut meta = NamedTempFile::new_in(&dir)?;
            serde_json::to_writer_pretty(
                &mut meta,
                &IndexEntry::from_meta(&pano.meta, &image_name),
            )?;
            meta.write_all(b"\n")?;
            meta.as_file().sync_all()?;

            Ok(StagedEntry {
                image,
                image_dest: dir.join(image_name),
                meta,
                meta_dest: dir.join("meta.json"),
            })
        };
        write().map_err(|e| Error::CacheWriteError(e.to_string()))
    }

    pub fn store(&self, pano: &Panorama, zoom: u8) -> Result<()> {
        self.stage(pano, zoom)?.publish()
    }
}

/// A fully written but not yet visible cache entry. Dropping it without
/// publishing removes the temporary files.
pub struct StagedEntry {
    image: NamedTempFile,
    image_dest: PathBuf,
    meta: NamedTempFile,
    meta_dest: PathBuf,
}

impl StagedEntry {
    pub fn publish(self) -> Result<()> {
        let persist = |tmp: NamedTempFile, dest: &Path| {
            tmp.persist(dest)
                .map(|_| ())
                .map_err(|e| Error::CacheWriteError(format!("{}: {}", dest.display(), e.error)))
        };
        persist(self.image, &self.image_dest)?;
        persist(self.meta, &self.meta_dest)
    }
}
