//! Offline panorama source backed by a directory holding `index.json` and
//! equirectangular PNGs.

use std::path::{Path, PathBuf};

use super::{
    rank_by_distance, write_json_atomic, IndexEntry, NearestPanoramas, PanoCache, PanoramaSource,
    ProviderConfig,
};
use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;
use crate::panosphere::{Panorama, PanoramaMeta};
use crate::raster;

pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureEntry {
    pub meta: PanoramaMeta,
    pub image_path: PathBuf,
}

/// Parses and validates `fixture_dir/index.json`.
pub fn load_fixture_index(fixture_dir: &Path) -> Result<Vec<FixtureEntry>> {
    let index_path = fixture_dir.join(INDEX_FILE);
    let bytes = match std::fs::read(&index_path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::IndexMissing(index_path))
        }
        Err(e) => return Err(e.into()),
    };
    let entries: Vec<IndexEntry> = serde_json::from_slice(&bytes)
        .map_err(|e| Error::IndexMalformed(format!("{}: {e}", index_path.display())))?;

    entries
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            let meta = entry.to_meta().map_err(|e| {
                Error::IndexMalformed(format!("entry {i} ({}): {e}", entry.pano_id))
            })?;
            let image_path = fixture_dir.join(&entry.image);
            if !image_path.is_file() {
                return Err(Error::ImageFileMissing(entry.pano_id.clone()));
            }
            Ok(FixtureEntry { meta, image_path })
        })
        .collect()
}

/// Writes `index.json` into `fixture_dir`; image paths are stored relative
/// to that directory.
pub fn write_fixture_index(fixture_dir: &Path, entries: &[IndexEntry]) -> Result<PathBuf> {
    let path = fixture_dir.join(INDEX_FILE);
    write_json_atomic(&path, &entries)?;
    Ok(path)
}

pub struct FixtureProvider {
    entries: Vec<FixtureEntry>,
    cache: Option<PanoCache>,
    zoom: u8,
}

impl FixtureProvider {
    pub fn open(config: &ProviderConfig) -> Result<Self> {
        let dir = config
            .fixture_dir
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("fixture provider needs fixture_dir".into()))?;
        Ok(Self {
            entries: load_fixture_index(dir)?,
            cache: config.cache_dir.as_ref().map(PanoCache::new),
            zoom: config.zoom,
        })
    }

    pub fn entries(&self) -> &[FixtureEntry] {
        &self.entries
    }
}

impl PanoramaSource for FixtureProvider {
    fn nearest_panoramas(&self, center: &GeoPoint, k: usize) -> Result<NearestPanoramas> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        let ranked = rank_by_distance(center, self.entries.iter().map(|e| e.meta.clone()), k);
        if ranked.is_empty() {
            return Err(Error::EmptyCoverage);
        }
        let short_count = ranked.len() < k;
        let warnings = if short_count {
            vec![format!(
                "only {} of {k} requested panoramas available",
                ranked.len()
            )]
        } else {
            Vec::new()
        };
        Ok(NearestPanoramas {
            panoramas: ranked.into_iter().map(|(_, m)| m).collect(),
            short_count,
            warnings,
        })
    }

    fn fetch_panorama(&self, meta: &PanoramaMeta) -> Result<Panorama> {
        if let Some(cache) = &self.cache {
            if let Some(p) = cache.load(&meta.pano_id, self.zoom)? {
                return Ok(p);
            }
        }
        let entry = self
            .entries
            .iter()
            .find(|e| e.meta.pano_id == meta.pano_id)
            .ok_or_else(|| Error::PanoNotFound(meta.pano_id.clone()))?;
        let pano = Panorama::new(entry.meta.clone(), raster::load_rgb(&entry.image_path)?)?;
        if let Some(cache) = &self.cache {
            cache.store(&pano, self.zoom)?;
        }
        Ok(pano)
    }
}
