//! Extraction of undistorted building views from street-level 360° panoramas.
//!
//! Given a geotagged photo taken near a building, the pipeline finds the
//! nearest panoramas, detects the building in a coarse rectilinear view of
//! each, triangulates the building position from the detection bearings,
//! re-renders every panorama toward that position and crops the detection.
//!
//! Modules, bottom-up:
//! - [`geodesy`]: spherical-earth distances, bearings, ENU frame, ray triangulation.
//! - [`panosphere`]: equirectangular pixel/direction mapping, tiles, sampling.
//! - [`projector`]: gnomonic view rendering and view planning.
//! - [`provider`]: fixture and live panorama sources with an on-disk cache.
//! - [`detector`]: chroma-key and external-process building detectors.
//! - [`synthcam`]: synthetic panoramas with exact ground truth.
//! - [`pipeline`]: geotag ingestion, the two-pass extraction, the report.

pub mod detector;
pub mod error;
pub mod geodesy;
pub mod panosphere;
pub mod pipeline;
pub mod projector;
pub mod provider;
pub mod raster;
pub mod synthcam;

pub use detector::{select_primary, Detection, Detector, DetectorSpec};
pub use error::{Error, Result};
pub use geodesy::{EnuPoint, GeoPoint, Ray2D, TriangulationResult};
pub use panosphere::{Panorama, PanoramaMeta, SphereDir};
pub use pipeline::{ExtractionReport, LocationSource, PipelineConfig, ReportStatus};
pub use projector::{ProjectedImage, ViewSpec};
pub use provider::{PanoramaSource, ProviderConfig, ProviderKind};
pub use raster::Rgb;
