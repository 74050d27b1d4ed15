//! Rectilinear (gnomonic) virtual cameras over a panorama.

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{haversine_distance, initial_bearing, GeoPoint};
use crate::panosphere::{direction_to_pixel, sample_raster, Panorama, PanoramaMeta, SphereDir};

pub const DEFAULT_HFOV_DEG: f64 = 90.0;
pub const DEFAULT_VIEW_SIZE_PX: u32 = 640;
pub const MIN_REFINED_HFOV_DEG: f64 = 40.0;
pub const MAX_REFINED_HFOV_DEG: f64 = 100.0;
/// Refined views span this multiple of the building's angular width.
pub const REFINED_HFOV_FACTOR: f64 = 2.0;

/// An upright pinhole camera placed at the panorama center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub hfov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
}

impl ViewSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(Error::InvalidFov(self.hfov_deg));
        }
        if !(0.0..360.0).contains(&self.yaw_deg) || !(-89.0..=89.0).contains(&self.pitch_deg) {
            return Err(Error::InvalidConfig(format!(
                "view yaw {} / pitch {} out of range",
                self.yaw_deg, self.pitch_deg
            )));
        }
        if self.width_px < 8 || self.height_px < 8 {
            return Err(Error::InvalidDimensions(format!(
                "view {}x{} smaller than 8x8",
                self.width_px, self.height_px
            )));
        }
        Ok(())
    }

    pub fn focal_length_px(&self) -> Result<f64> {
        focal_length_px(self.width_px, self.hfov_deg)
    }

    /// World direction (east, north, up; not normalized) through continuous
    /// image coordinates `(u, v)`.
    pub fn ray_through(&self, u: f64, v: f64) -> Result<[f64; 3]> {
        Ok(CameraBasis::new(self)?.ray(u, v))
    }
}

#[derive(Debug, Clone)]
pub struct ProjectedImage {
    pub pixels: RgbImage,
    pub view: ViewSpec,
    pub source_pano_id: String,
}

pub fn focal_length_px(width_px: u32, hfov_deg: f64) -> Result<f64> {
    if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
        return Err(Error::InvalidFov(hfov_deg));
    }
    Ok((width_px as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan())
}

/// Forward, right and up axes of a view, plus its focal length.
struct CameraBasis {
    forward: [f64; 3],
    right: [f64; 3],
    up: [f64; 3],
    focal: f64,
    half_w: f64,
    half_h: f64,
}

impl CameraBasis {
    fn new(view: &ViewSpec) -> Result<Self> {
        view.validate()?;
        let (sb, cb) = view.yaw_deg.to_radians().sin_cos();
        let (sp, cp) = view.pitch_deg.to_radians().sin_cos();
        let forward = [sb * cp, cb * cp, sp];
        let right = [cb, -sb, 0.0];
        let up = cross(right, forward);
        Ok(Self {
            forward,
            right,
            up,
            focal: view.focal_length_px()?,
            half_w: view.width_px as f64 / 2.0,
            half_h: view.height_px as f64 / 2.0,
        })
    }

    fn ray(&self, u: f64, v: f64) -> [f64; 3] {
        let x = u - self.half_w;
        let y = v - self.half_h;
        let mut d = [0.0; 3];
        for (k, out) in d.iter_mut().enumerate() {
            *out = self.forward[k] * self.focal + self.right[k] * x - self.up[k] * y;
        }
        d
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Renders `view` by inverse-mapping every output pixel center onto the
/// panorama and sampling bilinearly.
pub fn render_view(pano: &Panorama, view: &ViewSpec) -> Result<ProjectedImage> {
    let basis = CameraBasis::new(view)?;
    let (w, h) = (view.width_px, view.height_px);
    let mut pixels = RgbImage::new(w, h);
    pixels
        .as_mut()
        .par_chunks_mut(w as usize * 3)
        .enumerate()
        .for_each(|(j, row)| {
            for i in 0..w as usize {
                let dir = SphereDir::from_enu_vector(basis.ray(i as f64 + 0.5, j as f64 + 0.5));
                let (pu, pv) = direction_to_pixel(&dir, &pano.meta);
                row[i * 3..i * 3 + 3].copy_from_slice(&sample_raster(&pano.pixels, pu, pv));
            }
        });
    Ok(ProjectedImage {
        pixels,
        view: *view,
        source_pano_id: pano.meta.pano_id.clone(),
    })
}

/// Absolute bearing of the world ray through image point `(u, v)`.
pub fn pixel_to_world_bearing(view: &ViewSpec, u: f64, v: f64) -> Result<f64> {
    let (w, h) = (view.width_px as f64, view.height_px as f64);
    if !(0.0..=w).contains(&u) || !(0.0..=h).contains(&v) {
        return Err(Error::OutOfRaster {
            u,
            v,
            width: view.width_px,
            height: view.height_px,
        });
    }
    Ok(SphereDir::from_enu_vector(view.ray_through(u, v)?).bearing_deg)
}

/// Output size and fallback field of view for planned views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewDefaults {
    pub hfov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
}

impl Default for ViewDefaults {
    fn default() -> Self {
        Self {
            hfov_deg: DEFAULT_HFOV_DEG,
            width_px: DEFAULT_VIEW_SIZE_PX,
            height_px: DEFAULT_VIEW_SIZE_PX,
        }
    }
}

/// Aims a horizon-level view from the panorama toward `building`. With a
/// prior angular width the field of view is widened to
/// [`REFINED_HFOV_FACTOR`] times that width, clamped to
/// `[MIN_REFINED_HFOV_DEG, MAX_REFINED_HFOV_DEG]`.
pub fn plan_optimal_view(
    pano_meta: &PanoramaMeta,
    building: &GeoPoint,
    prior_bbox_angular_width_deg: Option<f64>,
    defaults: &ViewDefaults,
) -> Result<ViewSpec> {
    if haversine_distance(&pano_meta.location, building) < 1.0 {
        return Err(Error::DegenerateGeometry(format!(
            "building within 1 m of panorama {}",
            pano_meta.pano_id
        )));
    }
    let hfov_deg = match prior_bbox_angular_width_deg {
        Some(width) => {
            (REFINED_HFOV_FACTOR * width).clamp(MIN_REFINED_HFOV_DEG, MAX_REFINED_HFOV_DEG)
        }
        None => defaults.hfov_deg,
    };
    let view = ViewSpec {
        yaw_deg: initial_bearing(&pano_meta.location, building)?,
        pitch_deg: 0.0,
        hfov_deg,
        width_px: defaults.width_px,
        height_px: defaults.height_px,
    };
    view.validate()?;
    Ok(view)
}
