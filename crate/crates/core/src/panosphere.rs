//! Equirectangular panoramas.
//!
//! Column maps linearly to bearing and row to pitch. The center column looks
//! along `heading_deg`; the top row is the zenith. Integer pixel `(i, j)` has
//! its center at continuous coordinates `(i + 0.5, j + 0.5)`.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{wrap_360, GeoPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoramaMeta {
    pub pano_id: String,
    pub location: GeoPoint,
    /// Absolute bearing of the center column.
    pub heading_deg: f64,
    /// `YYYY-MM`, possibly empty.
    pub capture_date: String,
    pub width_px: u32,
    pub height_px: u32,
}

impl PanoramaMeta {
    pub fn validate(&self) -> Result<()> {
        if self.pano_id.is_empty() {
            return Err(Error::InvalidConfig("empty pano_id".into()));
        }
        if !(0.0..360.0).contains(&self.heading_deg) {
            return Err(Error::InvalidConfig(format!(
                "heading {} outside [0, 360) for {}",
                self.heading_deg, self.pano_id
            )));
        }
        if self.height_px == 0 || self.width_px != 2 * self.height_px {
            return Err(Error::InvalidDimensions(format!(
                "{}x{} is not a 2:1 equirectangular raster",
                self.width_px, self.height_px
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Panorama {
    pub meta: PanoramaMeta,
    pub pixels: RgbImage,
}

impl Panorama {
    pub fn new(meta: PanoramaMeta, pixels: RgbImage) -> Result<Self> {
        meta.validate()?;
        if pixels.dimensions() != (meta.width_px, meta.height_px) {
            return Err(Error::DimensionMismatch(format!(
                "raster is {}x{}, metadata declares {}x{}",
                pixels.width(),
                pixels.height(),
                meta.width_px,
                meta.height_px
            )));
        }
        Ok(Self { meta, pixels })
    }
}

/// A direction on the viewing sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereDir {
    pub bearing_deg: f64,
    pub pitch_deg: f64,
}

impl SphereDir {
    /// Unit vector in east-north-up coordinates.
    pub fn to_enu_vector(&self) -> [f64; 3] {
        let (b, p) = (self.bearing_deg.to_radians(), self.pitch_deg.to_radians());
        [b.sin() * p.cos(), b.cos() * p.cos(), p.sin()]
    }

    /// Direction of an east-north-up vector (need not be unit length).
    pub fn from_enu_vector(v: [f64; 3]) -> Self {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let up = (v[2] / n).clamp(-1.0, 1.0);
        Self {
            bearing_deg: wrap_360(v[0].atan2(v[1]).to_degrees()),
            pitch_deg: up.asin().to_degrees(),
        }
    }
}

pub fn pixel_to_direction(u: f64, v: f64, meta: &PanoramaMeta) -> Result<SphereDir> {
    let (w, h) = (meta.width_px as f64, meta.height_px as f64);
    if !(0.0..=w).contains(&u) || !(0.0..=h).contains(&v) {
        return Err(Error::OutOfRaster {
            u,
            v,
            width: meta.width_px,
            height: meta.height_px,
        });
    }
    Ok(SphereDir {
        bearing_deg: wrap_360(meta.heading_deg + (u / w) * 360.0 - 180.0),
        pitch_deg: 90.0 - (v / h) * 180.0,
    })
}

pub fn direction_to_pixel(dir: &SphereDir, meta: &PanoramaMeta) -> (f64, f64) {
    let (w, h) = (meta.width_px as f64, meta.height_px as f64);
    let u = wrap_360(dir.bearing_deg - meta.heading_deg + 180.0) / 360.0 * w;
    let v = (90.0 - dir.pitch_deg) / 180.0 * h;
    (u, v)
}

/// Places square tiles (row-major, `tiles[row * grid_cols + col]`) on a
/// canvas and crops it to the declared size.
pub fn assemble_tiles(
    tiles: &[Option<RgbImage>],
    tile_size: u32,
    grid_cols: u32,
    grid_rows: u32,
    declared_width: u32,
    declared_height: u32,
) -> Result<RgbImage> {
    if tiles.len() != (grid_cols * grid_rows) as usize {
        return Err(Error::DimensionMismatch(format!(
            "{} tiles supplied for a {grid_cols}x{grid_rows} grid",
            tiles.len()
        )));
    }
    if tile_size * grid_cols < declared_width || tile_size * grid_rows < declared_height {
        return Err(Error::DimensionMismatch(format!(
            "{grid_cols}x{grid_rows} grid of {tile_size} px tiles cannot cover {declared_width}x{declared_height}"
        )));
    }

    let mut out = RgbImage::new(declared_width, declared_height);
    for row in 0..grid_rows {
        for col in 0..grid_cols {
            let tile = tiles[(row * grid_cols + col) as usize]
                .as_ref()
                .ok_or(Error::MissingTile { col, row })?;
            if tile.dimensions() != (tile_size, tile_size) {
                return Err(Error::DimensionMismatch(format!(
                    "tile ({col}, {row}) is {}x{}, expected {tile_size}x{tile_size}",
                    tile.width(),
                    tile.height()
                )));
            }
            let (x0, y0) = (col * tile_size, row * tile_size);
            if x0 >= declared_width || y0 >= declared_height {
                continue;
            }
            let copy_w = tile_size.min(declared_width - x0) as usize;
            let copy_h = tile_size.min(declared_height - y0);
            for ty in 0..copy_h {
                let src = (ty * tile_size) as usize * 3;
                let dst = ((y0 + ty) * declared_width + x0) as usize * 3;
                out.as_mut()[dst..dst + copy_w * 3]
                    .copy_from_slice(&tile.as_raw()[src..src + copy_w * 3]);
            }
        }
    }
    Ok(out)
}

/// Bilinear interpolation between the four nearest pixel centers. Columns
/// wrap across the 360° seam; rows clamp at the poles.
pub fn bilinear_sample(pano: &Panorama, u: f64, v: f64) -> [u8; 3] {
    sample_raster(&pano.pixels, u, v)
}

pub(crate) fn sample_raster(img: &RgbImage, u: f64, v: f64) -> [u8; 3] {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x = u - 0.5;
    let y = v - 0.5;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;

    let c0 = (x0 as i64).rem_euclid(w) as u32;
    let c1 = (x0 as i64 + 1).rem_euclid(w) as u32;
    let r0 = (y0 as i64).clamp(0, h - 1) as u32;
    let r1 = (y0 as i64 + 1).clamp(0, h - 1) as u32;

    let p00 = img.get_pixel(c0, r0).0;
    let p10 = img.get_pixel(c1, r0).0;
    let p01 = img.get_pixel(c0, r1).0;
    let p11 = img.get_pixel(c1, r1).0;

    let mut out = [0u8; 3];
    for k in 0..3 {
        let top = p00[k] as f64 * (1.0 - fx) + p10[k] as f64 * fx;
        let bottom = p01[k] as f64 * (1.0 - fx) + p11[k] as f64 * fx;
        let value = top * (1.0 - fy) + bottom * fy;
        out[k] = value.round().clamp(0.0, 255.0) as u8;
    }
    out
}
