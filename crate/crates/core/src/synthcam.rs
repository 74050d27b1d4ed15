//! Synthetic street scenes with exact ground truth.
//!
//! The world is a flat ground plane under a uniform sky, with buildings
//! modelled as flat vertical walls standing on the ground. Rendering traces
//! one ray per panorama pixel, so wall extents and bearings are known in
//! closed form.

use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{enu_to_geo, geo_to_enu, EnuPoint, GeoPoint};
use crate::panosphere::{pixel_to_direction, Panorama, PanoramaMeta};
use crate::pipeline::geotag::write_geotagged_jpeg;
use crate::provider::{file_stem, write_fixture_index, IndexEntry};
use crate::raster::{self, Rgb};

pub const DEFAULT_CAMERA_HEIGHT_M: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub p0: EnuPoint,
    pub p1: EnuPoint,
    pub height_m: f64,
    pub rgb: Rgb,
}

impl Wall {
    pub fn midpoint(&self) -> EnuPoint {
        EnuPoint::new(
            (self.p0.east_m + self.p1.east_m) / 2.0,
            (self.p0.north_m + self.p1.north_m) / 2.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.p0.distance_to(&self.p1) < 1e-9 {
            return Err(Error::DegenerateGeometry("wall endpoints coincide".into()));
        }
        if !(self.height_m > 0.0 && self.height_m.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "wall height {} must be > 0",
                self.height_m
            )));
        }
        Ok(())
    }

    /// Distance along the unit direction `d` from `cam` (height `cam_z`) to
    /// the wall face, if the ray hits it.
    fn hit(&self, cam: &EnuPoint, cam_z: f64, d: [f64; 3]) -> Option<f64> {
        let cross = |a: (f64, f64), b: (f64, f64)| a.0 * b.1 - a.1 * b.0;
        let e = (
            self.p1.east_m - self.p0.east_m,
            self.p1.north_m - self.p0.north_m,
        );
        let dxy = (d[0], d[1]);
        let den = cross(dxy, e);
        if den.abs() < 1e-12 {
            return None;
        }
        let w = (self.p0.east_m - cam.east_m, self.p0.north_m - cam.north_m);
        let t = cross(w, e) / den;
        let s = cross(w, dxy) / den;
        let z = cam_z + t * d[2];
        (t > 0.0 && (0.0..=1.0).contains(&s) && (0.0..=self.height_m).contains(&z)).then_some(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Anchors the ENU frame that wall coordinates live in.
    pub origin: GeoPoint,
    pub ground_rgb: Rgb,
    pub sky_rgb: Rgb,
    #[serde(default)]
    pub walls: Vec<Wall>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        let mut colors = vec![self.ground_rgb, self.sky_rgb];
        for wall in &self.walls {
            wall.validate()?;
            if colors[..2].contains(&wall.rgb) {
                return Err(Error::InvalidConfig(format!(
                    "wall color {} collides with ground or sky",
                    wall.rgb
                )));
            }
            colors.push(wall.rgb);
        }
        if self.ground_rgb == self.sky_rgb {
            return Err(Error::InvalidConfig("ground and sky share a color".into()));
        }
        Ok(())
    }

    fn color_along(&self, cam: &EnuPoint, cam_z: f64, d: [f64; 3]) -> Rgb {
        let nearest = self
            .walls
            .iter()
            .filter_map(|w| w.hit(cam, cam_z, d).map(|t| (t, w.rgb)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match nearest {
            Some((_, rgb)) => rgb,
            None if d[2] < 0.0 => self.ground_rgb,
            None => self.sky_rgb,
        }
    }
}

/// A panorama capture position.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCamera {
    pub pano_id: String,
    pub location: GeoPoint,
    pub height_m: f64,
    pub heading_deg: f64,
    pub capture_date: String,
}

pub fn render_synthetic_pano(
    scene: &Scene,
    camera: &SynthCamera,
    width_px: u32,
    height_px: u32,
) -> Result<Panorama> {
    if height_px == 0 || width_px != 2 * height_px {
        return Err(Error::InvalidDimensions(format!(
            "{width_px}x{height_px} is not a 2:1 equirectangular raster"
        )));
    }
    if camera.height_m.is_nan() || camera.height_m <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "camera height {} must be > 0",
            camera.height_m
        )));
    }
    scene.validate()?;
    let meta = PanoramaMeta {
        pano_id: camera.pano_id.clone(),
        location: camera.location,
        heading_deg: camera.heading_deg,
        capture_date: camera.capture_date.clone(),
        width_px,
        height_px,
    };
    meta.validate()?;
    let cam = geo_to_enu(&scene.origin, &camera.location)?;

    let mut pixels = RgbImage::new(width_px, height_px);
    let row_len = width_px as usize * 3;
    pixels
        .par_chunks_mut(row_len)
        .enumerate()
        .try_for_each(|(row, out)| -> Result<()> {
            for col in 0..width_px as usize {
                let dir = pixel_to_direction(col as f64 + 0.5, row as f64 + 0.5, &meta)?;
                let rgb = scene.color_along(&cam, camera.height_m, dir.to_enu_vector());
                out[col * 3..col * 3 + 3].copy_from_slice(&rgb.0);
            }
            Ok(())
        })?;
    Panorama::new(meta, pixels)
}

/// Bearing from `camera` to the midpoint of the wall's base.
pub fn ground_truth_bearing(wall: &Wall, camera: &GeoPoint, origin: &GeoPoint) -> Result<f64> {
    let cam = geo_to_enu(origin, camera)?;
    if distance_to_segment(&cam, &wall.p0, &wall.p1) < 1e-6 {
        return Err(Error::DegenerateGeometry("camera lies on the wall".into()));
    }
    Ok(cam.bearing_to(&wall.midpoint()))
}

fn distance_to_segment(p: &EnuPoint, a: &EnuPoint, b: &EnuPoint) -> f64 {
    let (ex, ey) = (b.east_m - a.east_m, b.north_m - a.north_m);
    let len2 = ex * ex + ey * ey;
    let s = if len2 == 0.0 {
        0.0
    } else {
        (((p.east_m - a.east_m) * ex + (p.north_m - a.north_m) * ey) / len2).clamp(0.0, 1.0)
    };
    p.distance_to(&EnuPoint::new(a.east_m + s * ex, a.north_m + s * ey))
}

fn default_camera_height() -> f64 {
    DEFAULT_CAMERA_HEIGHT_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub pano_id: String,
    pub position: EnuPoint,
    #[serde(default)]
    pub heading_deg: f64,
    #[serde(default = "default_camera_height")]
    pub camera_height_m: f64,
    #[serde(default)]
    pub date: String,
}

/// A scene plus the panorama stations to render it from; the on-disk input
/// of [`write_fixture`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub scene: Scene,
    pub stations: Vec<Station>,
    pub pano_width_px: u32,
    /// Where the geotagged photo was "taken"; omitted means no photo.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photo: Option<EnuPoint>,
}

impl SceneFile {
    pub fn load(path: &Path) -> Result<Self> {
        let file: SceneFile = serde_json::from_slice(&std::fs::read(path)?)?;
        file.scene.validate()?;
        Ok(file)
    }
}

/// A small street scene: one crimson wall 4 m wide and 8 m tall, 20 m
/// north of the origin, seen from three panorama stations 12 m apart along
/// an east-west street, plus a photo position between street and wall.
pub fn sample_scene_file() -> SceneFile {
    let station = |id: &str, east: f64, heading: f64| Station {
        pano_id: id.into(),
        position: EnuPoint::new(east, 0.0),
        heading_deg: heading,
        camera_height_m: DEFAULT_CAMERA_HEIGHT_M,
        date: "2017-06".into(),
    };
    SceneFile {
        scene: Scene {
            origin: GeoPoint::new(29.7604, -95.3698).expect("valid origin"),
            ground_rgb: Rgb::new(96, 96, 96),
            sky_rgb: Rgb::new(135, 206, 235),
            walls: vec![Wall {
                p0: EnuPoint::new(-2.0, 20.0),
                p1: EnuPoint::new(2.0, 20.0),
                height_m: 8.0,
                rgb: Rgb::new(0xDC, 0x14, 0x3C),
            }],
        },
        stations: vec![
            station("pano_west", -12.0, 0.0),
            station("pano_mid", 0.0, 137.5),
            station("pano_east", 12.0, 271.25),
        ],
        pano_width_px: 2048,
        photo: Some(EnuPoint::new(3.0, 14.0)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOutput {
    pub index_path: PathBuf,
    pub panoramas: Vec<PathBuf>,
    pub photo_path: Option<PathBuf>,
}

/// Renders every station into `out_dir` as a provider fixture (PNGs plus
/// `index.json`) and, when the scene names a photo position, a geotagged
/// `photo.jpg`.
pub fn write_fixture(scene_file: &SceneFile, out_dir: &Path) -> Result<FixtureOutput> {
    std::fs::create_dir_all(out_dir)?;
    let scene = &scene_file.scene;
    let (w, h) = (scene_file.pano_width_px, scene_file.pano_width_px / 2);

    let mut entries = Vec::new();
    let mut panoramas = Vec::new();
    for station in &scene_file.stations {
        let camera = SynthCamera {
            pano_id: station.pano_id.clone(),
            location: enu_to_geo(&scene.origin, &station.position)?,
            height_m: station.camera_height_m,
            heading_deg: station.heading_deg,
            capture_date: station.date.clone(),
        };
        let pano = render_synthetic_pano(scene, &camera, w, h)?;
        let image = format!("{}.png", file_stem(&station.pano_id));
        let path = out_dir.join(&image);
        raster::save_png(&pano.pixels, &path)?;
        entries.push(IndexEntry::from_meta(&pano.meta, image));
        panoramas.push(path);
    }
    let index_path = write_fixture_index(out_dir, &entries)?;

    let photo_path = match &scene_file.photo {
        Some(p) => {
            let path = out_dir.join("photo.jpg");
            let img = RgbImage::from_pixel(64, 48, scene.ground_rgb.into());
            write_geotagged_jpeg(&img, &enu_to_geo(&scene.origin, p)?, &path)?;
            Some(path)
        }
        None => None,
    };
    Ok(FixtureOutput {
        index_path,
        panoramas,
        photo_path,
    })
}
