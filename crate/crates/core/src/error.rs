use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports. Variants map one-to-one onto the
/// error classes callers (and the CLI exit-code table) distinguish.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("offset of {distance_m:.1} m exceeds the 10 km tangent-plane limit")]
    OutOfTangentRange { distance_m: f64 },
    #[error("need at least 2 rays, got {0}")]
    InsufficientRays(usize),
    #[error("pixel ({u}, {v}) lies outside the {width}x{height} raster")]
    OutOfRaster {
        u: f64,
        v: f64,
        width: u32,
        height: u32,
    },
    #[error("missing tile at column {col}, row {row}")]
    MissingTile { col: u32, row: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid field of view {0} deg (must lie strictly inside (0, 180))")]
    InvalidFov(f64),
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("panorama provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("no panoramas found near the requested location")]
    EmptyCoverage,
    #[error("panorama {0} not found")]
    PanoNotFound(String),
    #[error("tile ({col}, {row}) fetch failed with status {status}")]
    TileFetchError { col: u32, row: u32, status: u16 },
    #[error("cache write failed: {0}")]
    CacheWriteError(String),
    #[error("heading unavailable for panorama {0}")]
    HeadingUnavailable(String),
    #[error("fixture index missing: {}", .0.display())]
    IndexMissing(PathBuf),
    #[error("fixture index malformed: {0}")]
    IndexMalformed(String),
    #[error("image file missing for panorama {0}")]
    ImageFileMissing(String),

    #[error("detector failed to launch: {0}")]
    DetectorLaunchError(String),
    #[error("detector timed out")]
    DetectorTimeout,
    #[error("detector protocol error: {0}")]
    ProtocolError(String),

    #[error("photo carries no GPS geotag")]
    MissingGeotag,
    #[error("malformed EXIF data: {0}")]
    MalformedExif(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
