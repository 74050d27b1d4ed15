//! Live street-level imagery client.
//!
//! Discovery: the metadata endpoint answers with the single panorama nearest
//! a query point, so the K nearest are gathered by probing the center plus
//! eight compass offsets at each configured radius and deduplicating by id.
//! Heading and full-resolution size come from the tile service's companion
//! metadata; a panorama without a heading is dropped rather than guessed.
//!
//! Pixels: at zoom `z` the tile grid is `2^z` × `2^(z-1)` tiles of 512 px,
//! assembled and cropped to the declared size, then cached.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use image::RgbImage;
use log::{debug, warn};
use serde_json::Value;

use super::{rank_by_distance, NearestPanoramas, PanoCache, PanoramaSource, ProviderConfig};
use crate::error::{Error, Result};
use crate::geodesy::{enu_to_geo, EnuPoint, GeoPoint};
use crate::panosphere::{assemble_tiles, Panorama, PanoramaMeta};
use crate::raster;

pub const TILE_SIZE_PX: u32 = 512;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// Blocking HTTP GET. Errors are transport failures (DNS, TLS, reset);
/// HTTP error statuses come back as ordinary responses.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> std::result::Result<HttpResponse, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str) -> std::result::Result<HttpResponse, String> {
        let mut resp = self.agent.get(url).call().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(64 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Service base URLs; overridable for tests and mirrors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    pub metadata: String,
    pub tile_service: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Self {
            metadata: "https://maps.googleapis.com/maps/api/streetview/metadata".into(),
            tile_service: "https://cbk0.google.com/cbk".into(),
        }
    }
}

/// Enforces a minimum spacing between successive calls to [`wait`](Self::wait).
pub struct RateLimiter {
    interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(interval: Duration) -> Self {
        Self {
            interval,
            last: Mutex::new(None),
        }
    }

    pub fn wait(&self) {
        let mut last = self.last.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(prev) = *last {
            let next = prev + self.interval;
            let now = Instant::now();
            if next > now {
                std::thread::sleep(next - now);
            }
        }
        *last = Some(Instant::now());
    }
}

/// Query points for neighbor discovery: the center, then 8 compass offsets
/// per positive radius.
pub fn probe_points(center: &GeoPoint, radii_m: &[f64]) -> Result<Vec<GeoPoint>> {
    let mut points = vec![*center];
    for &r in radii_m.iter().filter(|r| **r > 0.0) {
        for k in 0..8 {
            let b = (k as f64 * 45.0).to_radians();
            points.push(enu_to_geo(
                center,
                &EnuPoint::new(r * b.sin(), r * b.cos()),
            )?);
        }
    }
    Ok(points)
}

/// Smallest zoom whose tile grid is at least `width_px` wide.
pub fn zoom_for_width(width_px: u32) -> u8 {
    let mut z = 0u8;
    while (TILE_SIZE_PX << z) < width_px {
        z += 1;
    }
    z
}

fn grid_for_zoom(zoom: u8) -> (u32, u32) {
    let cols = 1u32 << zoom;
    (cols, (cols / 2).max(1))
}

fn encode_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-_.~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn as_f64(v: Option<&Value>) -> Option<f64> {
    match v? {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

struct Discovered {
    pano_id: String,
    location: GeoPoint,
    date: String,
}

pub struct StreetViewProvider {
    config: ProviderConfig,
    key: String,
    transport: Arc<dyn Transport>,
    cache: PanoCache,
    limiter: RateLimiter,
    endpoints: Endpoints,
}

impl StreetViewProvider {
    /// Reads the key from the configured environment variable and talks to
    /// the real service.
    pub fn new(config: &ProviderConfig) -> Result<Self> {
        let key = std::env::var(&config.api_key_env).map_err(|_| {
            Error::ProviderUnavailable(format!(
                "environment variable {} is not set",
                config.api_key_env
            ))
        })?;
        Self::with_transport(
            config,
            key,
            Arc::new(UreqTransport::default()),
            Endpoints::default(),
        )
    }

    pub fn with_transport(
        config: &ProviderConfig,
        key: String,
        transport: Arc<dyn Transport>,
        endpoints: Endpoints,
    ) -> Result<Self> {
        config.validate()?;
        let cache_dir = config
            .cache_dir
            .clone()
            .ok_or_else(|| Error::InvalidConfig("streetview provider needs cache_dir".into()))?;
        Ok(Self {
            config: config.clone(),
            key,
            transport,
            cache: PanoCache::new(cache_dir),
            limiter: RateLimiter::new(config.metadata_interval),
            endpoints,
        })
    }

    fn redact(&self, msg: String) -> String {
        if self.key.is_empty() {
            msg
        } else {
            msg.replace(&self.key, "<redacted>")
        }
    }

    fn get(&self, url: &str) -> Result<HttpResponse> {
        self.transport
            .get(url)
            .map_err(|e| Error::ProviderUnavailable(self.redact(e)))
    }

    fn get_metadata_json(&self, url: &str) -> Result<Value> {
        self.limiter.wait();
        let resp = self.get(url)?;
        if resp.status != 200 {
            return Err(Error::ProviderUnavailable(format!(
                "metadata query answered HTTP {}",
                resp.status
            )));
        }
        serde_json::from_slice(&resp.body)
            .map_err(|e| Error::ProviderUnavailable(format!("unparseable metadata response: {e}")))
    }

    fn query_point(&self, p: &GeoPoint) -> Result<Option<Discovered>> {
        let url = format!(
            "{}?location={},{}&key={}",
            self.endpoints.metadata,
            p.lat_deg(),
            p.lon_deg(),
            encode_component(&self.key)
        );
        let v = self.get_metadata_json(&url)?;
        match v.get("status").and_then(Value::as_str) {
            Some("OK") => {}
            Some("ZERO_RESULTS") | Some("NOT_FOUND") => return Ok(None),
            other => {
                return Err(Error::ProviderUnavailable(format!(
                    "metadata status {}",
                    other.unwrap_or("<missing>")
                )))
            }
        }
        let pano_id = v
            .get("pano_id")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::ProviderUnavailable("metadata lacks pano_id".into()))?;
        let lat = as_f64(v.pointer("/location/lat"));
        let lng = as_f64(v.pointer("/location/lng"));
        let (Some(lat), Some(lng)) = (lat, lng) else {
            return Err(Error::ProviderUnavailable("metadata lacks location".into()));
        };
        Ok(Some(Discovered {
            pano_id: pano_id.to_string(),
            location: GeoPoint::new(lat, lng)?,
            date: v
                .get("date")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
        }))
    }

    /// Heading and full-resolution width from the tile service's metadata.
    fn companion(&self, pano_id: &str) -> Result<(Option<f64>, Option<u32>)> {
        let url = format!(
            "{}?output=json&panoid={}",
            self.endpoints.tile_service,
            encode_component(pano_id)
        );
        let v = self.get_metadata_json(&url)?;
        let heading = as_f64(v.pointer("/Projection/pano_yaw_deg")).filter(|h| h.is_finite());
        let width = as_f64(v.pointer("/Data/image_width"))
            .filter(|w| *w >= 2.0)
            .map(|w| w as u32);
        Ok((heading, width))
    }

    fn declared_size(&self, full_width: Option<u32>) -> (u32, u32) {
        let zoom = self.config.zoom;
        let (cols, rows) = grid_for_zoom(zoom);
        let grid = (cols * TILE_SIZE_PX, rows * TILE_SIZE_PX);
        let Some(full) = full_width else {
            return (grid.0, grid.0 / 2);
        };
        let max_zoom = zoom_for_width(full);
        let width = if zoom >= max_zoom {
            full
        } else {
            full.div_ceil(1 << (max_zoom - zoom))
        };
        let height = (width / 2).min(grid.1).max(1);
        (2 * height, height)
    }

    fn fetch_tiles(&self, meta: &PanoramaMeta) -> Result<RgbImage> {
        let zoom = zoom_for_width(meta.width_px);
        let (cols, rows) = grid_for_zoom(zoom);
        let count = (cols * rows) as usize;
        let slots: Vec<Mutex<Option<Result<RgbImage>>>> =
            (0..count).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.max_parallel_fetches.min(count).max(1);

        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= count {
                        break;
                    }
                    let (col, row) = (i as u32 % cols, i as u32 / cols);
                    let result = self.fetch_tile(&meta.pano_id, zoom, col, row);
                    *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(result);
                });
            }
        });

        let mut tiles = Vec::with_capacity(count);
        for slot in slots {
            match slot.into_inner().unwrap_or_else(|p| p.into_inner()) {
                Some(Ok(t)) => tiles.push(Some(t)),
                Some(Err(e)) => return Err(e),
                None => tiles.push(None),
            }
        }
        assemble_tiles(
            &tiles,
            TILE_SIZE_PX,
            cols,
            rows,
            meta.width_px,
            meta.height_px,
        )
    }

    fn fetch_tile(&self, pano_id: &str, zoom: u8, col: u32, row: u32) -> Result<RgbImage> {
        let url = format!(
            "{}?output=tile&panoid={}&zoom={zoom}&x={col}&y={row}",
            self.endpoints.tile_service,
            encode_component(pano_id)
        );
        debug!("tile {pano_id} z{zoom} ({col}, {row})");
        let resp = self.get(&url)?;
        if resp.status != 200 {
            return Err(Error::TileFetchError {
                col,
                row,
                status: resp.status,
            });
        }
        raster::decode_rgb(&resp.body).map_err(|_| Error::TileFetchError {
            col,
            row,
            status: resp.status,
        })
    }
}

impl PanoramaSource for StreetViewProvider {
    fn nearest_panoramas(&self, center: &GeoPoint, k: usize) -> Result<NearestPanoramas> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        let mut found = Vec::new();
        for p in probe_points(center, &self.config.probe_radius_m)? {
            if let Some(d) = self.query_point(&p)? {
                if seen.insert(d.pano_id.clone()) {
                    found.push(d);
                }
            }
        }
        if found.is_empty() {
            return Err(Error::EmptyCoverage);
        }

        // rank on location alone, then resolve headings nearest-first
        let placeholders = found.iter().map(|d| PanoramaMeta {
            pano_id: d.pano_id.clone(),
            location: d.location,
            heading_deg: 0.0,
            capture_date: d.date.clone(),
            width_px: 2,
            height_px: 1,
        });
        let ranked = rank_by_distance(center, placeholders, usize::MAX);

        let mut panoramas = Vec::new();
        let mut warnings = Vec::new();
        for (_, mut meta) in ranked {
            if panoramas.len() == k {
                break;
            }
            let (heading, full_width) = self.companion(&meta.pano_id)?;
            let Some(heading) = heading else {
                let err = Error::HeadingUnavailable(meta.pano_id.clone());
                warn!("{err}");
                warnings.push(err.to_string());
                continue;
            };
            meta.heading_deg = crate::geodesy::wrap_360(heading);
            (meta.width_px, meta.height_px) = self.declared_size(full_width);
            panoramas.push(meta);
        }
        if panoramas.is_empty() {
            return Err(Error::HeadingUnavailable(
                "every discovered panorama lacks a heading".into(),
            ));
        }
        let short_count = panoramas.len() < k;
        if short_count {
            warnings.push(format!(
                "only {} of {k} requested panoramas available",
                panoramas.len()
            ));
        }
        Ok(NearestPanoramas {
            panoramas,
            short_count,
            warnings,
        })
    }

    fn fetch_panorama(&self, meta: &PanoramaMeta) -> Result<Panorama> {
        meta.validate()?;
        let zoom = zoom_for_width(meta.width_px);
        if let Some(p) = self.cache.load(&meta.pano_id, zoom)? {
            return Ok(p);
        }
        let pixels = self.fetch_tiles(meta)?;
        let pano = Panorama::new(meta.clone(), pixels)?;
        self.cache.store(&pano, zoom)?;
        Ok(pano)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{geo_to_enu, haversine_distance};
    use std::collections::HashMap;

    type Handler = Box<dyn Fn(&str) -> std::result::Result<HttpResponse, String> + Send + Sync>;

    /// Replays canned responses and records every request.
    struct Recorder {
        handler: Handler,
        log: Mutex<Vec<(Instant, String)>>,
    }

    impl Recorder {
        fn new(handler: Handler) -> Arc<Self> {
            Arc::new(Self {
                handler,
                log: Mutex::new(Vec::new()),
            })
        }

        fn requests(&self) -> Vec<String> {
            self.log
                .lock()
                .unwrap()
                .iter()
                .map(|(_, u)| u.clone())
                .collect()
        }
    }

    impl Transport for Recorder {
        fn get(&self, url: &str) -> std::result::Result<HttpResponse, String> {
            self.log
                .lock()
                .unwrap()
                .push((Instant::now(), url.to_string()));
            (self.handler)(url)
        }
    }

    fn ok_json(v: Value) -> std::result::Result<HttpResponse, String> {
        Ok(HttpResponse {
            status: 200,
            body: serde_json::to_vec(&v).unwrap(),
        })
    }

    fn query_param<'a>(url: &'a str, name: &str) -> Option<&'a str> {
        url.split(['?', '&'])
            .find_map(|kv| kv.strip_prefix(name).and_then(|r| r.strip_prefix('=')))
    }

    fn center() -> GeoPoint {
        GeoPoint::new(28.0212, -97.0541).unwrap()
    }

    fn endpoints() -> Endpoints {
        Endpoints {
            metadata: "https://meta.test/metadata".into(),
            tile_service: "https://tiles.test/cbk".into(),
        }
    }

    fn config(cache: &std::path::Path) -> ProviderConfig {
        let mut c = ProviderConfig::streetview(cache);
        c.metadata_interval = Duration::ZERO;
        c.zoom = 1;
        c
    }

    /// Panoramas on a street running east-west; each probe resolves to the
    /// panorama closest in longitude.
    fn street_service(panos: Vec<(&'static str, f64, Option<f64>)>) -> Handler {
        let origin = center();
        let located: Vec<(String, GeoPoint, Option<f64>)> = panos
            .into_iter()
            .map(|(id, east, heading)| {
                (
                    id.to_string(),
                    enu_to_geo(&origin, &EnuPoint::new(east, 0.0)).unwrap(),
                    heading,
                )
            })
            .collect();
        let headings: HashMap<String, Option<f64>> =
            located.iter().map(|(id, _, h)| (id.clone(), *h)).collect();
        Box::new(move |url| {
            if url.starts_with("https://meta.test/") {
                let loc = query_param(url, "location").unwrap();
                let (lat, lon) = loc.split_once(',').unwrap();
                let q = GeoPoint::new(lat.parse().unwrap(), lon.parse().unwrap()).unwrap();
                let nearest = located.iter().min_by(|a, b| {
                    haversine_distance(&q, &a.1).total_cmp(&haversine_distance(&q, &b.1))
                });
                return match nearest {
                    Some((id, p, _)) => ok_json(serde_json::json!({
                        "status": "OK", "pano_id": id, "date": "2016-05",
                        "location": {"lat": p.lat_deg(), "lng": p.lon_deg()}
                    })),
                    None => ok_json(serde_json::json!({"status": "ZERO_RESULTS"})),
                };
            }
            if query_param(url, "output") == Some("json") {
                let id = query_param(url, "panoid").unwrap();
                let mut v =
                    serde_json::json!({"Data": {"image_width": "1024", "image_height": "512"}});
                if let Some(Some(h)) = headings.get(id) {
                    v["Projection"] = serde_json::json!({"pano_yaw_deg": h.to_string()});
                }
                return ok_json(v);
            }
            let (x, y) = (
                query_param(url, "x").unwrap(),
                query_param(url, "y").unwrap(),
            );
            let shade = x.parse::<u8>().unwrap() * 100 + y.parse::<u8>().unwrap() * 10;
            let tile = RgbImage::from_pixel(512, 512, image::Rgb([shade, 7, 9]));
            Ok(HttpResponse {
                status: 200,
                body: raster::encode_png(&tile).unwrap(),
            })
        })
    }

    #[test]
    fn probes_cover_center_and_rings() {
        let pts = probe_points(&center(), &[0.0, 15.0, 30.0]).unwrap();
        assert_eq!(pts.len(), 17);
        let east = geo_to_enu(&center(), &pts[3]).unwrap();
        assert!((east.east_m - 15.0).abs() < 1e-6 && east.north_m.abs() < 1e-6);
    }

    #[test]
    fn discovery_dedupes_and_sorts() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Recorder::new(street_service(vec![
            ("west", -20.0, Some(90.0)),
            ("here", 2.0, Some(270.5)),
            ("east", 25.0, Some(91.0)),
        ]));
        let p = StreetViewProvider::with_transport(
            &config(dir.path()),
            "SECRET".into(),
            rec.clone(),
            endpoints(),
        )
        .unwrap();
        let n = p.nearest_panoramas(&center(), 3).unwrap();
        let ids: Vec<_> = n.panoramas.iter().map(|m| m.pano_id.as_str()).collect();
        assert_eq!(ids, ["here", "west", "east"]);
        assert!(!n.short_count);
        assert_eq!(n.panoramas[0].heading_deg, 270.5);
        assert_eq!(n.panoramas[0].capture_date, "2016-05");
        // full width 1024 = zoom 1 grid
        assert_eq!(
            (n.panoramas[0].width_px, n.panoramas[0].height_px),
            (1024, 512)
        );
        let meta_queries = rec
            .requests()
            .iter()
            .filter(|u| u.contains("meta.test"))
            .count();
        assert_eq!(meta_queries, 17);
        assert!(rec.requests()[0].contains("key=SECRET"));
    }

    #[test]
    fn missing_heading_drops_that_pano() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Recorder::new(street_service(vec![
            ("a", 0.0, None),
            ("b", 20.0, Some(10.0)),
        ]));
        let p =
            StreetViewProvider::with_transport(&config(dir.path()), "k".into(), rec, endpoints())
                .unwrap();
        let n = p.nearest_panoramas(&center(), 2).unwrap();
        assert_eq!(n.panoramas.len(), 1);
        assert_eq!(n.panoramas[0].pano_id, "b");
        assert!(n.short_count);
        assert!(n.warnings.iter().any(|w| w.contains("heading unavailable")));

        let rec = Recorder::new(street_service(vec![("a", 0.0, None)]));
        let p =
            StreetViewProvider::with_transport(&config(dir.path()), "k".into(), rec, endpoints())
                .unwrap();
        assert!(matches!(
            p.nearest_panoramas(&center(), 2),
            Err(Error::HeadingUnavailable(_))
        ));
    }

    #[test]
    fn coverage_and_auth_failures() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Recorder::new(street_service(vec![]));
        let p =
            StreetViewProvider::with_transport(&config(dir.path()), "k".into(), rec, endpoints())
                .unwrap();
        assert!(matches!(
            p.nearest_panoramas(&center(), 3),
            Err(Error::EmptyCoverage)
        ));

        let denied = Recorder::new(Box::new(|_| {
            ok_json(serde_json::json!({"status": "REQUEST_DENIED"}))
        }));
        let p = StreetViewProvider::with_transport(
            &config(dir.path()),
            "k".into(),
            denied,
            endpoints(),
        )
        .unwrap();
        assert!(matches!(
            p.nearest_panoramas(&center(), 3),
            Err(Error::ProviderUnavailable(_))
        ));
    }

    #[test]
    fn transport_errors_never_leak_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Recorder::new(Box::new(|url: &str| {
            Err(format!("connection reset fetching {url}"))
        }));
        let p = StreetViewProvider::with_transport(
            &config(dir.path()),
            "TOPSECRET".into(),
            rec,
            endpoints(),
        )
        .unwrap();
        match p.nearest_panoramas(&center(), 3) {
            Err(e @ Error::ProviderUnavailable(_)) => assert!(!e.to_string().contains("TOPSECRET")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_key_env_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path());
        c.api_key_env = "PANOVIEW_TEST_SURELY_UNSET_VAR".into();
        assert!(matches!(
            StreetViewProvider::new(&c),
            Err(Error::ProviderUnavailable(_))
        ));
    }

    #[test]
    fn fetch_assembles_and_then_serves_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Recorder::new(street_service(vec![("here", 0.0, Some(0.0))]));
        let p = StreetViewProvider::with_transport(
            &config(dir.path()),
            "k".into(),
            rec.clone(),
            endpoints(),
        )
        .unwrap();
        let meta = p
            .nearest_panoramas(&center(), 1)
            .unwrap()
            .panoramas
            .remove(0);
        let before = rec.requests().len();
        let first = p.fetch_panorama(&meta).unwrap();
        assert_eq!(first.pixels.dimensions(), (1024, 512));
        assert_eq!(first.pixels.get_pixel(600, 10).0, [100, 7, 9]);
        let tile_requests = rec.requests().len() - before;
        assert_eq!(tile_requests, 2);

        let after_first = rec.requests().len();
        let second = p.fetch_panorama(&meta).unwrap();
        assert_eq!(
            rec.requests().len(),
            after_first,
            "cache hit must not touch the network"
        );
        assert_eq!(second.pixels.as_raw(), first.pixels.as_raw());
        assert_eq!(second.meta, first.meta);
    }

    #[test]
    fn tile_failure_reports_position_and_status() {
        let dir = tempfile::tempdir().unwrap();
        let inner = street_service(vec![("here", 0.0, Some(0.0))]);
        let rec = Recorder::new(Box::new(move |url: &str| {
            if url.contains("output=tile") && url.ends_with("x=1&y=0") {
                return Ok(HttpResponse {
                    status: 503,
                    body: Vec::new(),
                });
            }
            inner(url)
        }));
        let p =
            StreetViewProvider::with_transport(&config(dir.path()), "k".into(), rec, endpoints())
                .unwrap();
        let meta = p
            .nearest_panoramas(&center(), 1)
            .unwrap()
            .panoramas
            .remove(0);
        assert!(matches!(
            p.fetch_panorama(&meta),
            Err(Error::TileFetchError {
                col: 1,
                row: 0,
                status: 503
            })
        ));
    }

    #[test]
    fn metadata_queries_are_spaced() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Recorder::new(street_service(vec![("here", 0.0, Some(0.0))]));
        let mut c = config(dir.path());
        c.metadata_interval = Duration::from_millis(20);
        c.probe_radius_m = vec![0.0, 10.0];
        let p =
            StreetViewProvider::with_transport(&c, "k".into(), rec.clone(), endpoints()).unwrap();
        p.nearest_panoramas(&center(), 1).unwrap();
        let log = rec.log.lock().unwrap();
        assert_eq!(log.len(), 10);
        for pair in log.windows(2) {
            assert!(pair[1].0 - pair[0].0 >= Duration::from_millis(20));
        }
    }

    #[test]
    fn declared_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Recorder::new(street_service(vec![]));
        let mut c = config(dir.path());
        c.zoom = 3;
        let p = StreetViewProvider::with_transport(&c, "k".into(), rec, endpoints()).unwrap();
        assert_eq!(p.declared_size(None), (4096, 2048));
        assert_eq!(p.declared_size(Some(13312)), (3328, 1664));
        assert_eq!(p.declared_size(Some(1024)), (1024, 512));
        assert_eq!(zoom_for_width(3328), 3);
        assert_eq!(zoom_for_width(512), 0);
        assert_eq!(grid_for_zoom(0), (1, 1));
        assert_eq!(grid_for_zoom(3), (8, 4));
    }
}
