use serde::{Deserialize, Serialize};

use crate::detector::Detection;
use crate::geodesy::GeoPoint;
use crate::projector::ViewSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationSource {
    Triangulated,
    FallbackPhotoGps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Ok,
    FallbackPhotoGps,
    NoDetection,
}

/// One rendered view and what the detector chose in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub view: ViewSpec,
    pub detection: Option<Detection>,
    /// Saved view, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoRecord {
    pub pano_id: String,
    /// From the photo position.
    pub distance_m: f64,
    pub pass1: Option<PassRecord>,
    pub ray_bearing_deg: Option<f64>,
    pub pass2: Option<PassRecord>,
    pub crop_path: Option<String>,
    /// Why this panorama dropped out, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PanoRecord {
    pub fn new(pano_id: impl Into<String>, distance_m: f64) -> Self {
        Self {
            pano_id: pano_id.into(),
            distance_m,
            pass1: None,
            ray_bearing_deg: None,
            pass2: None,
            crop_path: None,
            error: None,
        }
    }
}

/// Contents of `report.json`. Contains no timestamps, so identical runs
/// serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub photo_gps: GeoPoint,
    pub panos: Vec<PanoRecord>,
    pub building_location: GeoPoint,
    pub location_source: LocationSource,
    pub rms_residual_m: Option<f64>,
    pub status: ReportStatus,
}
