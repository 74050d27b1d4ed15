use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use panoview_core::geodesy::{enu_to_geo, geo_to_enu, triangulate_rays};
use panoview_core::pipeline::{read_geotag, run_extraction, PipelineConfig, REPORT_FILE};
use panoview_core::projector::render_view;
use panoview_core::provider::{
    file_stem, open_provider, write_fixture_index, IndexEntry, ProviderConfig, DEFAULT_API_KEY_ENV,
    DEFAULT_ZOOM,
};
use panoview_core::raster;
use panoview_core::synthcam::{write_fixture, SceneFile};
use panoview_core::{
    DetectorSpec, Error, GeoPoint, Panorama, PanoramaMeta, Ray2D, ReportStatus, ViewSpec,
};

const EXIT_NO_DETECTION: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_UNAVAILABLE: u8 = 69;

/// Extract undistorted building views from street-level panoramas.
#[derive(Debug, Parser)]
#[command(name = "panoview", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline for a geotagged photo; prints the report path.
    Extract(ExtractArgs),
    /// Download the panoramas nearest a photo into a fixture directory.
    Fetch(FetchArgs),
    /// Render one rectilinear view from an equirectangular image.
    Project(ProjectArgs),
    /// Triangulate a position from a JSON file of bearing rays.
    Locate(LocateArgs),
    /// Render a synthetic scene file into a provider fixture.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct ProviderArgs {
    /// `streetview` or `fixture:DIR`.
    #[arg(long, default_value = "streetview", value_parser = parse_provider)]
    provider: ProviderChoice,
    /// Tile zoom level for the live provider.
    #[arg(long, default_value_t = DEFAULT_ZOOM)]
    zoom: u8,
    /// Environment variable holding the service key.
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    api_key_env: String,
    /// Panorama cache directory.
    #[arg(long, default_value = ".panoview-cache")]
    cache_dir: PathBuf,
}

#[derive(Debug, Clone)]
enum ProviderChoice {
    StreetView,
    Fixture(PathBuf),
}

fn parse_provider(s: &str) -> Result<ProviderChoice, String> {
    match s {
        "streetview" => Ok(ProviderChoice::StreetView),
        _ => match s.strip_prefix("fixture:") {
            Some(dir) if !dir.is_empty() => Ok(ProviderChoice::Fixture(dir.into())),
            _ => Err(format!("expected `streetview` or `fixture:DIR`, got {s:?}")),
        },
    }
}

impl ProviderArgs {
    fn config(&self) -> ProviderConfig {
        let mut config = match &self.provider {
            ProviderChoice::StreetView => ProviderConfig::streetview(&self.cache_dir),
            ProviderChoice::Fixture(dir) => ProviderConfig::fixture(dir),
        };
        config.zoom = self.zoom;
        config.api_key_env = self.api_key_env.clone();
        config
    }
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Geotagged JPEG taken near the building.
    #[arg(long)]
    photo: PathBuf,
    /// Output directory for crops and report.json.
    #[arg(long)]
    out: PathBuf,
    /// Number of nearest panoramas to use.
    #[arg(long = "panos", default_value_t = 3)]
    k_panos: usize,
    /// `chroma:RRGGBB[:TOL]` or `exec:COMMAND [ARGS...]`.
    #[arg(long, value_parser = parse_detector)]
    detector: DetectorSpec,
    /// Horizontal field of view of the first-pass views, degrees.
    #[arg(long, default_value_t = 90.0)]
    hfov: f64,
    /// Crop padding as a fraction of the box size, per side.
    #[arg(long, default_value_t = 0.10)]
    pad: f64,
    /// Also write the first- and second-pass views.
    #[arg(long)]
    keep_intermediates: bool,
    #[command(flatten)]
    provider: ProviderArgs,
}

fn parse_detector(s: &str) -> Result<DetectorSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
struct FetchArgs {
    /// Geotagged JPEG; panoramas nearest its position are fetched.
    #[arg(long, required_unless_present = "at", conflicts_with = "at")]
    photo: Option<PathBuf>,
    /// Query position as `LAT,LON` instead of a photo.
    #[arg(long, value_parser = parse_lat_lon)]
    at: Option<GeoPoint>,
    /// Output directory; receives PNGs and an index.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "panos", default_value_t = 3)]
    k_panos: usize,
    #[command(flatten)]
    provider: ProviderArgs,
}

fn parse_lat_lon(s: &str) -> Result<GeoPoint, String> {
    let (lat, lon) = s.split_once(',').ok_or("expected LAT,LON")?;
    let lat = lat.trim().parse().map_err(|e| format!("latitude: {e}"))?;
    let lon = lon.trim().parse().map_err(|e| format!("longitude: {e}"))?;
    GeoPoint::new(lat, lon).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// Equirectangular image (2:1).
    #[arg(long)]
    pano: PathBuf,
    /// Bearing of the panorama's center column, degrees.
    #[arg(long, default_value_t = 0.0)]
    heading: f64,
    /// View direction, degrees clockwise from north.
    #[arg(long)]
    yaw: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pitch: f64,
    #[arg(long, default_value_t = 90.0)]
    hfov: f64,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 640)]
    height: u32,
    /// Output PNG.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LocateArgs {
    /// JSON: `{"rays": [{"lat_deg": .., "lon_deg": .., "bearing_deg": ..}, ..]}`.
    #[arg(long)]
    rays: PathBuf,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scene description JSON.
    #[arg(long)]
    scene: PathBuf,
    /// Output fixture directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Extract(a) => extract(a),
        Command::Fetch(a) => fetch(a),
        Command::Project(a) => project(a),
        Command::Locate(a) => locate(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("panoview: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MissingGeotag | Error::MalformedExif(_) => EXIT_DATA,
        Error::ProviderUnavailable(_) => EXIT_UNAVAILABLE,
        Error::InvalidConfig(_) | Error::InvalidFov(_) => EXIT_USAGE,
        _ => 1,
    }
}

fn print_path(p: &Path) {
    println!("{}", p.display());
}

fn extract(a: ExtractArgs) -> Result<u8, Error> {
    let mut config = PipelineConfig::new(&a.photo, a.provider.config(), a.detector, &a.out);
    config.k_panos = a.k_panos;
    config.first_pass_hfov_deg = a.hfov;
    config.crop_pad_fraction = a.pad;
    config.keep_intermediates = a.keep_intermediates;
    let report = run_extraction(&config)?;
    info!(
        "status {:?}, building at {:?}",
        report.status, report.building_location
    );
    print_path(&a.out.join(REPORT_FILE));
    Ok(match report.status {
        ReportStatus::NoDetection => {
            eprintln!("panoview: no building detected in any panorama");
            EXIT_NO_DETECTION
        }
        ReportStatus::FallbackPhotoGps => {
            eprintln!("panoview: too few detections to triangulate; used the photo position");
            0
        }
        ReportStatus::Ok => 0,
    })
}

fn fetch(a: FetchArgs) -> Result<u8, Error> {
    if a.k_panos == 0 {
        return Err(Error::InvalidConfig("--panos must be >= 1".into()));
    }
    let center = match (&a.photo, a.at) {
        (Some(photo), _) => read_geotag(&std::fs::read(photo)?)?,
        (None, Some(at)) => at,
        (None, None) => unreachable!("clap requires one of --photo / --at"),
    };
    let source = open_provider(&a.provider.config())?;
    let nearest = source.nearest_panoramas(&center, a.k_panos)?;
    for w in &nearest.warnings {
        warn!("{w}");
    }
    std::fs::create_dir_all(&a.out)?;
    let mut entries = Vec::new();
    for meta in &nearest.panoramas {
        let pano = source.fetch_panorama(meta)?;
        let name = format!("{}.png", file_stem(&meta.pano_id));
        let path = a.out.join(&name);
        raster::save_png(&pano.pixels, &path)?;
        entries.push(IndexEntry::from_meta(&pano.meta, name));
        print_path(&path);
    }
    print_path(&write_fixture_index(&a.out, &entries)?);
    Ok(0)
}

fn project(a: ProjectArgs) -> Result<u8, Error> {
    let pixels = raster::load_rgb(&a.pano)?;
    let meta = PanoramaMeta {
        pano_id: file_stem(&a.pano.file_stem().unwrap_or_default().to_string_lossy()),
        location: GeoPoint::new(0.0, 0.0)?,
        heading_deg: panoview_core::geodesy::wrap_360(a.heading),
        capture_date: String::new(),
        width_px: pixels.width(),
        height_px: pixels.height(),
    };
    let pano = Panorama::new(meta, pixels)?;
    let view = ViewSpec {
        yaw_deg: panoview_core::geodesy::wrap_360(a.yaw),
        pitch_deg: a.pitch,
        hfov_deg: a.hfov,
        width_px: a.width,
        height_px: a.height,
    };
    let rendered = render_view(&pano, &view)?;
    raster::save_png(&rendered.pixels, &a.out)?;
    print_path(&a.out);
    Ok(0)
}

#[derive(Debug, Deserialize)]
struct RaysFile {
    rays: Vec<GeoRay>,
}

#[derive(Debug, Deserialize)]
struct GeoRay {
    lat_deg: f64,
    lon_deg: f64,
    bearing_deg: f64,
}

#[derive(Debug, Serialize)]
struct LocateResult {
    location: GeoPoint,
    rms_residual_m: f64,
    ray_count: usize,
}

fn locate(a: LocateArgs) -> Result<u8, Error> {
    let file: RaysFile = serde_json::from_slice(&std::fs::read(&a.rays)?)?;
    let stations = file
        .rays
        .iter()
        .map(|r| GeoPoint::new(r.lat_deg, r.lon_deg))
        .collect::<Result<Vec<_>, _>>()?;
    let origin = *stations.first().ok_or(Error::InsufficientRays(0))?;
    let rays = stations
        .iter()
        .zip(&file.rays)
        .map(|(p, r)| Ok(Ray2D::new(geo_to_enu(&origin, p)?, r.bearing_deg)))
        .collect::<Result<Vec<_>, Error>>()?;
    let solved = triangulate_rays(&rays)?;
    let result = LocateResult {
        location: enu_to_geo(&origin, &solved.point)?,
        rms_residual_m: solved.rms_residual_m,
        ray_count: solved.ray_count,
    };
    let mut json = serde_json::to_vec_pretty(&result)?;
    json.push(b'\n');
    std::fs::write(&a.out, json)?;
    print_path(&a.out);
    Ok(0)
}

fn simulate(a: SimulateArgs) -> Result<u8, Error> {
    let scene = SceneFile::load(&a.scene)?;
    let written = write_fixture(&scene, &a.out)?;
    for p in &written.panoramas {
        print_path(p);
    }
    print_path(&written.index_path);
    if let Some(photo) = &written.photo_path {
        print_path(photo);
    }
    Ok(0)
}
