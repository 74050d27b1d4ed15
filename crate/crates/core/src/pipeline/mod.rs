//! The extraction pipeline.
//!
//! 1. Read the photo's geotag.
//! 2. Find the K nearest panoramas.
//! 3. Pass 1: render a wide view from each panorama toward the photo
//!    position and detect the building.
//! 4. Triangulate the building from the detection bearings, or fall back to
//!    the photo position when too few panoramas saw it.
//! 5. Pass 2: render a view aimed at the building, sized from the pass-1
//!    box, detect again and crop.
//! 6. Write `report.json`.

pub mod geotag;
mod report;

use std::path::{Path, PathBuf};

use image::RgbImage;
use log::{info, warn};
use rayon::prelude::*;

use crate::detector::{select_primary, Detection, Detector, DetectorSpec};
use crate::error::{Error, Result};
use crate::geodesy::{
    angle_diff, enu_to_geo, geo_to_enu, haversine_distance, triangulate_rays, GeoPoint, Ray2D,
};
use crate::panosphere::{Panorama, PanoramaMeta};
use crate::projector::{
    pixel_to_world_bearing, plan_optimal_view, render_view, ViewDefaults, ViewSpec,
    DEFAULT_HFOV_DEG, DEFAULT_VIEW_SIZE_PX,
};
use crate::provider::{
    file_stem, open_provider, write_json_atomic, PanoramaSource, ProviderConfig,
};
use crate::raster;

pub use geotag::{encode_geotagged_jpeg, read_geotag, write_geotagged_jpeg};
pub use report::{ExtractionReport, LocationSource, PanoRecord, PassRecord, ReportStatus};

pub const REPORT_FILE: &str = "report.json";
pub const DEFAULT_K_PANOS: usize = 3;
pub const DEFAULT_CROP_PAD_FRACTION: f64 = 0.10;
pub const DEFAULT_MIN_RAYS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub photo_path: PathBuf,
    pub k_panos: usize,
    pub provider: ProviderConfig,
    pub detector: DetectorSpec,
    pub out_dir: PathBuf,
    pub first_pass_hfov_deg: f64,
    pub crop_pad_fraction: f64,
    pub min_rays_for_triangulation: usize,
    pub view_width_px: u32,
    pub view_height_px: u32,
    /// Also write the pass-1 and pass-2 views (`view1_*.png`, `view2_*.png`).
    pub keep_intermediates: bool,
}

impl PipelineConfig {
    pub fn new(
        photo_path: impl Into<PathBuf>,
        provider: ProviderConfig,
        detector: DetectorSpec,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            photo_path: photo_path.into(),
            k_panos: DEFAULT_K_PANOS,
            provider,
            detector,
            out_dir: out_dir.into(),
            first_pass_hfov_deg: DEFAULT_HFOV_DEG,
            crop_pad_fraction: DEFAULT_CROP_PAD_FRACTION,
            min_rays_for_triangulation: DEFAULT_MIN_RAYS,
            view_width_px: DEFAULT_VIEW_SIZE_PX,
            view_height_px: DEFAULT_VIEW_SIZE_PX,
            keep_intermediates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_panos == 0 {
            return Err(Error::InvalidConfig("k_panos must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.crop_pad_fraction) {
            return Err(Error::InvalidConfig(format!(
                "crop_pad_fraction {} outside [0, 1]",
                self.crop_pad_fraction
            )));
        }
        if self.min_rays_for_triangulation < 2 {
            return Err(Error::InvalidConfig(
                "min_rays_for_triangulation must be >= 2".into(),
            ));
        }
        if !(self.first_pass_hfov_deg > 0.0 && self.first_pass_hfov_deg < 180.0) {
            return Err(Error::InvalidFov(self.first_pass_hfov_deg));
        }
        Ok(())
    }

    fn view_defaults(&self) -> ViewDefaults {
        ViewDefaults {
            hfov_deg: self.first_pass_hfov_deg,
            width_px: self.view_width_px,
            height_px: self.view_height_px,
        }
    }
}

/// World ray through the center of `det`, expressed in the ENU frame
/// anchored at `origin`.
pub fn detection_to_ray(
    view: &ViewSpec,
    det: &Detection,
    pano_meta: &PanoramaMeta,
    origin: &GeoPoint,
) -> Result<Ray2D> {
    let (u, v) = det.center();
    let bearing = pixel_to_world_bearing(view, u, v)?;
    Ok(Ray2D::new(
        geo_to_enu(origin, &pano_meta.location)?,
        bearing,
    ))
}

/// Angular width of a box as seen through `view`, measured along the box's
/// vertical center.
pub fn bbox_angular_width(view: &ViewSpec, det: &Detection) -> Result<f64> {
    let [x, _, w, _] = det.bbox_xywh;
    let (_, cy) = det.center();
    let left = pixel_to_world_bearing(view, x, cy)?;
    let right = pixel_to_world_bearing(view, x + w, cy)?;
    Ok(angle_diff(right, left).abs())
}

/// Pixel rectangle `(x, y, w, h)` of `det` grown by `pad_fraction` of its
/// size on every side, edges rounded to whole pixels and clamped to the image.
pub fn crop_rect(
    det: &Detection,
    pad_fraction: f64,
    width: u32,
    height: u32,
) -> (u32, u32, u32, u32) {
    let [x, y, w, h] = det.bbox_xywh;
    let (px, py) = (pad_fraction * w, pad_fraction * h);
    let clamp = |v: f64, max: u32| v.round().clamp(0.0, max as f64) as u32;
    let x0 = clamp(x - px, width);
    let y0 = clamp(y - py, height);
    let x1 = clamp(x + w + px, width).max((x0 + 1).min(width));
    let y1 = clamp(y + h + py, height).max((y0 + 1).min(height));
    (x0, y0, x1 - x0, y1 - y0)
}

pub fn crop_detection(image: &RgbImage, det: &Detection, pad_fraction: f64) -> RgbImage {
    let (x, y, w, h) = crop_rect(det, pad_fraction, image.width(), image.height());
    image::imageops::crop_imm(image, x, y, w, h).to_image()
}

/// Runs the whole pipeline with the provider and detector named in `config`.
pub fn run_extraction(config: &PipelineConfig) -> Result<ExtractionReport> {
    config.validate()?;
    let source = open_provider(&config.provider)?;
    let mut detector = config.detector.open()?;
    run_extraction_with(config, source.as_ref(), detector.as_mut())
}

/// As [`run_extraction`], with caller-supplied source and detector; the
/// `provider` and `detector` fields of `config` are ignored.
pub fn run_extraction_with(
    config: &PipelineConfig,
    source: &dyn PanoramaSource,
    detector: &mut dyn Detector,
) -> Result<ExtractionReport> {
    config.validate()?;
    let photo = std::fs::read(&config.photo_path)?;
    let photo_gps = read_geotag(&photo)?;
    info!(
        "photo at {:.7}, {:.7}",
        photo_gps.lat_deg(),
        photo_gps.lon_deg()
    );

    let nearest = source.nearest_panoramas(&photo_gps, config.k_panos)?;
    for w in &nearest.warnings {
        warn!("{w}");
    }
    std::fs::create_dir_all(&config.out_dir)?;
    let out = Output {
        dir: &config.out_dir,
        keep_views: config.keep_intermediates,
    };

    let fetched: Vec<Result<Panorama>> = nearest
        .panoramas
        .par_iter()
        .map(|meta| source.fetch_panorama(meta))
        .collect();

    let mut records = Vec::new();
    let mut panos = Vec::new();
    for (meta, pano) in nearest.panoramas.iter().zip(fetched) {
        let mut rec = PanoRecord::new(
            &meta.pano_id,
            haversine_distance(&photo_gps, &meta.location),
        );
        match pano {
            Ok(p) => panos.push(Some(p)),
            Err(e @ Error::ProviderUnavailable(_)) => return Err(e),
            Err(e) => {
                warn!("panorama {}: {e}", meta.pano_id);
                rec.error = Some(e.to_string());
                panos.push(None);
            }
        }
        records.push(rec);
    }

    // pass 1: coarse views toward the photo position
    let defaults = config.view_defaults();
    let mut rays = Vec::new();
    let mut priors = vec![None; panos.len()];
    for (i, pano) in panos.iter().enumerate() {
        let Some(pano) = pano else { continue };
        let rec = &mut records[i];
        let result = view_and_detect(pano, &photo_gps, None, &defaults, detector, &out, "view1");
        let pass = match result {
            Ok(pass) => pass,
            Err(e) => {
                degrade(rec, "pass 1", e);
                continue;
            }
        };
        if let Some(det) = &pass.record.detection {
            let ray = detection_to_ray(&pass.record.view, det, &pano.meta, &photo_gps)
                .and_then(|ray| Ok((ray, bbox_angular_width(&pass.record.view, det)?)));
            match ray {
                Ok((ray, width)) => {
                    rec.ray_bearing_deg = Some(ray.bearing_deg);
                    priors[i] = Some(width);
                    rays.push(ray);
                }
                Err(e) => degrade(rec, "pass 1", e),
            }
        }
        rec.pass1 = Some(pass.record);
    }

    let (building, location_source, rms) =
        locate(&photo_gps, &rays, config.min_rays_for_triangulation);

    // pass 2: views aimed at the building, then crops
    let mut crops = 0;
    for (i, pano) in panos.iter().enumerate() {
        let Some(pano) = pano else { continue };
        let rec = &mut records[i];
        let pass = match view_and_detect(
            pano, &building, priors[i], &defaults, detector, &out, "view2",
        ) {
            Ok(pass) => pass,
            Err(e) => {
                degrade(rec, "pass 2", e);
                continue;
            }
        };
        if let Some(det) = &pass.record.detection {
            let crop = crop_detection(&pass.image, det, config.crop_pad_fraction);
            match out.write(
                &format!("crop_{}.png", file_stem(&pano.meta.pano_id)),
                &crop,
            ) {
                Ok(name) => {
                    rec.crop_path = Some(name);
                    crops += 1;
                }
                Err(e) => degrade(rec, "crop", e),
            }
        }
        rec.pass2 = Some(pass.record);
    }

    let status = if crops == 0 {
        ReportStatus::NoDetection
    } else if location_source == LocationSource::FallbackPhotoGps {
        ReportStatus::FallbackPhotoGps
    } else {
        ReportStatus::Ok
    };
    let report = ExtractionReport {
        photo_gps,
        panos: records,
        building_location: building,
        location_source,
        rms_residual_m: rms,
        status,
    };
    write_json_atomic(&config.out_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

fn degrade(rec: &mut PanoRecord, stage: &str, e: Error) {
    warn!("panorama {} {stage}: {e}", rec.pano_id);
    rec.error = Some(format!("{stage}: {e}"));
}

fn locate(
    photo_gps: &GeoPoint,
    rays: &[Ray2D],
    min_rays: usize,
) -> (GeoPoint, LocationSource, Option<f64>) {
    let fallback = (*photo_gps, LocationSource::FallbackPhotoGps, None);
    if rays.len() < min_rays {
        warn!(
            "{} ray(s) < {min_rays}; using the photo position",
            rays.len()
        );
        return fallback;
    }
    let solved = triangulate_rays(rays)
        .and_then(|t| Ok((enu_to_geo(photo_gps, &t.point)?, t.rms_residual_m)));
    match solved {
        Ok((p, rms)) => {
            info!("triangulated from {} rays, rms {rms:.3} m", rays.len());
            (p, LocationSource::Triangulated, Some(rms))
        }
        Err(e) => {
            warn!("triangulation failed ({e}); using the photo position");
            fallback
        }
    }
}

struct Output<'a> {
    dir: &'a Path,
    keep_views: bool,
}

impl Output<'_> {
    /// Writes a PNG and returns its name relative to the output directory.
    fn write(&self, name: &str, image: &RgbImage) -> Result<String> {
        raster::save_png(image, &self.dir.join(name))?;
        Ok(name.to_string())
    }
}

struct Pass {
    record: PassRecord,
    image: RgbImage,
}

fn view_and_detect(
    pano: &Panorama,
    target: &GeoPoint,
    prior_width_deg: Option<f64>,
    defaults: &ViewDefaults,
    detector: &mut dyn Detector,
    out: &Output,
    prefix: &str,
) -> Result<Pass> {
    let view = plan_optimal_view(&pano.meta, target, prior_width_deg, defaults)?;
    let rendered = render_view(pano, &view)?;
    let view_path = if out.keep_views {
        Some(out.write(
            &format!("{prefix}_{}.png", file_stem(&pano.meta.pano_id)),
            &rendered.pixels,
        )?)
    } else {
        None
    };
    let detections = detector.detect(&rendered.pixels)?;
    Ok(Pass {
        record: PassRecord {
            view,
            detection: select_primary(&detections, view.width_px),
            view_path,
        },
        image: rendered.pixels,
    })
}
