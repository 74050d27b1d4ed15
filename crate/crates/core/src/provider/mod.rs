//! Panorama acquisition.
//!
//! A [`PanoramaSource`] discovers the panoramas nearest a point and fetches
//! their pixels. Two sources exist: an offline fixture directory and the
//! live street-imagery service. Both share one on-disk JSON schema
//! ([`IndexEntry`]) for fixture indexes and cache metadata.

mod cache;
mod fixture;
mod streetview;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{haversine_distance, GeoPoint};
use crate::panosphere::{Panorama, PanoramaMeta};

pub use cache::{PanoCache, StagedEntry};
pub use fixture::{load_fixture_index, write_fixture_index, FixtureEntry, FixtureProvider};
pub use streetview::{
    probe_points, zoom_for_width, Endpoints, HttpResponse, RateLimiter, StreetViewProvider,
    Transport, UreqTransport, TILE_SIZE_PX,
};

pub const DEFAULT_API_KEY_ENV: &str = "GSV_API_KEY";
pub const DEFAULT_ZOOM: u8 = 3;
pub const MAX_ZOOM: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    StreetView,
    Fixture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Name of the environment variable holding the service key.
    pub api_key_env: String,
    pub cache_dir: Option<PathBuf>,
    pub zoom: u8,
    pub probe_radius_m: Vec<f64>,
    pub max_parallel_fetches: usize,
    pub fixture_dir: Option<PathBuf>,
    /// Minimum spacing between metadata queries.
    pub metadata_interval: Duration,
}

impl ProviderConfig {
    pub fn streetview(cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            kind: ProviderKind::StreetView,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            cache_dir: Some(cache_dir.into()),
            zoom: DEFAULT_ZOOM,
            probe_radius_m: vec![0.0, 15.0, 30.0],
            max_parallel_fetches: 4,
            fixture_dir: None,
            metadata_interval: Duration::from_millis(100),
        }
    }

    pub fn fixture(dir: impl Into<PathBuf>) -> Self {
        Self {
            kind: ProviderKind::Fixture,
            cache_dir: None,
            fixture_dir: Some(dir.into()),
            ..Self::streetview(PathBuf::new())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.zoom > MAX_ZOOM {
            return Err(Error::InvalidConfig(format!(
                "zoom {} outside [0, {MAX_ZOOM}]",
                self.zoom
            )));
        }
        if self.max_parallel_fetches == 0 {
            return Err(Error::InvalidConfig(
                "max_parallel_fetches must be >= 1".into(),
            ));
        }
        if self
            .probe_radius_m
            .iter()
            .any(|r| !r.is_finite() || *r < 0.0)
        {
            return Err(Error::InvalidConfig(
                "probe radii must be finite and >= 0".into(),
            ));
        }
        if self.kind == ProviderKind::Fixture && self.fixture_dir.is_none() {
            return Err(Error::InvalidConfig(
                "fixture provider needs fixture_dir".into(),
            ));
        }
        if self.kind == ProviderKind::StreetView && self.cache_dir.is_none() {
            return Err(Error::InvalidConfig(
                "streetview provider needs cache_dir".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearestPanoramas {
    /// Ascending by distance to the query point.
    pub panoramas: Vec<PanoramaMeta>,
    /// Fewer than the requested count were available.
    pub short_count: bool,
    pub warnings: Vec<String>,
}

pub trait PanoramaSource: Send + Sync {
    fn nearest_panoramas(&self, center: &GeoPoint, k: usize) -> Result<NearestPanoramas>;
    fn fetch_panorama(&self, meta: &PanoramaMeta) -> Result<Panorama>;
}

pub fn open_provider(config: &ProviderConfig) -> Result<Box<dyn PanoramaSource>> {
    config.validate()?;
    Ok(match config.kind {
        ProviderKind::Fixture => Box::new(FixtureProvider::open(config)?),
        ProviderKind::StreetView => Box::new(StreetViewProvider::new(config)?),
    })
}

/// Deduplicates by `pano_id` (keeping the closest), sorts by distance to
/// `center` with `pano_id` as tie-break, and keeps the first `k`.
pub fn rank_by_distance(
    center: &GeoPoint,
    candidates: impl IntoIterator<Item = PanoramaMeta>,
    k: usize,
) -> Vec<(f64, PanoramaMeta)> {
    let mut best: HashMap<String, (f64, PanoramaMeta)> = HashMap::new();
    for meta in candidates {
        let d = haversine_distance(center, &meta.location);
        match best.get(&meta.pano_id) {
            Some((prev, _)) if *prev <= d => {}
            _ => {
                best.insert(meta.pano_id.clone(), (d, meta));
            }
        }
    }
    let mut ranked: Vec<_> = best.into_values().collect();
    ranked.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.pano_id.cmp(&b.1.pano_id))
    });
    ranked.truncate(k);
    ranked
}

/// Filesystem-safe stem for a panorama id.
pub fn file_stem(pano_id: &str) -> String {
    pano_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// One panorama in a fixture `index.json` or a cache `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub pano_id: String,
    pub lat: f64,
    pub lon: f64,
    pub heading_deg: f64,
    #[serde(default)]
    pub date: String,
    pub width_px: u32,
    pub height_px: u32,
    /// Image path relative to the directory holding the JSON file.
    pub image: String,
}

impl IndexEntry {
    pub fn from_meta(meta: &PanoramaMeta, image: impl Into<String>) -> Self {
        Self {
            pano_id: meta.pano_id.clone(),
            lat: meta.location.lat_deg(),
            lon: meta.location.lon_deg(),
            heading_deg: meta.heading_deg,
            date: meta.capture_date.clone(),
            width_px: meta.width_px,
            height_px: meta.height_px,
            image: image.into(),
        }
    }

    /// Converts to metadata, enforcing the [`PanoramaMeta`] invariants.
    pub fn to_meta(&self) -> Result<PanoramaMeta> {
        let meta = PanoramaMeta {
            pano_id: self.pano_id.clone(),
            location: GeoPoint::new(self.lat, self.lon)?,
            heading_deg: self.heading_deg,
            capture_date: self.date.clone(),
            width_px: self.width_px,
            height_px: self.height_px,
        };
        meta.validate()?;
        Ok(meta)
    }
}

pub(crate) fn write_json_atomic(path: &Path, value: &impl Serialize) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer_pretty(&mut tmp, value)?;
    std::io::Write::write_all(&mut tmp, b"\n")?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
