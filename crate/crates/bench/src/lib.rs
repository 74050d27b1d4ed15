//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};

use panoview_core::geodesy::enu_to_geo;
use panoview_core::synthcam::{
    render_synthetic_pano, sample_scene_file, write_fixture, SynthCamera,
};
use panoview_core::Panorama;

/// The middle station of the sample scene rendered at `width_px`.
pub fn sample_panorama(width_px: u32) -> Panorama {
    let file = sample_scene_file();
    let station = &file.stations[1];
    let camera = SynthCamera {
        pano_id: station.pano_id.clone(),
        location: enu_to_geo(&file.scene.origin, &station.position).expect("station near origin"),
        height_m: station.camera_height_m,
        heading_deg: station.heading_deg,
        capture_date: station.date.clone(),
    };
    render_synthetic_pano(&file.scene, &camera, width_px, width_px / 2).expect("valid sample scene")
}

/// Writes the sample scene as a fixture under `dir`; returns the photo path
/// and the fixture directory.
pub fn sample_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let fixture = dir.join("fixture");
    let written = write_fixture(&sample_scene_file(), &fixture).expect("write sample fixture");
    (
        written.photo_path.expect("sample scene has a photo"),
        fixture,
    )
}
