//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use image::RgbImage;
use panoview_core::detector::DetectorSpec;
use panoview_core::geodesy::{
    angle_diff, enu_to_geo, geo_to_enu, haversine_distance, initial_bearing, triangulate_rays,
};
use panoview_core::panosphere::{bilinear_sample, direction_to_pixel, pixel_to_direction};
use panoview_core::pipeline::{run_extraction, PipelineConfig};
use panoview_core::projector::render_view;
use panoview_core::provider::{write_fixture_index, FixtureProvider, IndexEntry};
use panoview_core::synthcam::{ground_truth_bearing, sample_scene_file, write_fixture, Wall};
use panoview_core::{
    EnuPoint, ExtractionReport, GeoPoint, LocationSource, Panorama, PanoramaMeta, PanoramaSource,
    ProviderConfig, Ray2D, ReportStatus, Rgb, SphereDir, ViewSpec,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            name: "projection round trip",
            limit: Some(Duration::from_secs(1)),
            run: projection_round_trip,
        },
        Criterion {
            name: "gnomonic correctness",
            limit: Some(Duration::from_secs(10)),
            run: gnomonic_correctness,
        },
        Criterion {
            name: "triangulation accuracy",
            limit: Some(Duration::from_secs(30)),
            run: triangulation_accuracy,
        },
        Criterion {
            name: "end-to-end centering",
            limit: Some(Duration::from_secs(60)),
            run: end_to_end_centering,
        },
        Criterion {
            name: "nearest-k ordering",
            limit: Some(Duration::from_secs(5)),
            run: nearest_k_ordering,
        },
        Criterion {
            name: "geodesy oracle values",
            limit: None,
            run: geodesy_oracles,
        },
        Criterion {
            name: "determinism",
            limit: None,
            run: determinism,
        },
    ];

    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => {
                Err(format!("took {:.2?}, limit {limit:?}", elapsed))
            }
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {:<24} {:>9.2?}  {detail}", c.name, elapsed),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:<24} {:>9.2?}  {detail}", c.name, elapsed);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_meta(rng: &mut StdRng) -> PanoramaMeta {
    let h = rng.random_range(16..2048u32);
    PanoramaMeta {
        pano_id: "r".into(),
        location: GeoPoint::new(
            rng.random_range(-80.0..80.0),
            rng.random_range(-180.0..180.0),
        )
        .unwrap(),
        heading_deg: rng.random_range(0.0..360.0),
        capture_date: String::new(),
        width_px: 2 * h,
        height_px: h,
    }
}

fn projection_round_trip() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let meta = random_meta(&mut rng);
        let (w, h) = (meta.width_px as f64, meta.height_px as f64);
        for _ in 0..10_000 {
            let (u, v) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
            let dir = pixel_to_direction(u, v, &meta).map_err(|e| e.to_string())?;
            let (u2, v2) = direction_to_pixel(&dir, &meta);
            // u = 0 and u = W are the same column
            let du = (u2 - u).abs().min(w - (u2 - u).abs());
            worst = worst.max(du).max((v2 - v).abs());
        }
    }
    ensure(worst <= 1e-6, || format!("max error {worst:e} px"))?;
    Ok(format!("10 metas x 10000 points, max error {worst:.1e} px"))
}

fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let c = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
        .sqrt()
        .atan2(dot)
        .to_degrees()
}

fn gnomonic_correctness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst_edge: f64 = 0.0;
    for case in 0..100 {
        let h = rng.random_range(16..160u32);
        let mut meta = random_meta(&mut rng);
        (meta.width_px, meta.height_px) = (2 * h, h);
        let pixels = RgbImage::from_fn(2 * h, h, |_, _| image::Rgb(rng.random()));
        let pano = Panorama::new(meta, pixels).unwrap();
        // odd sizes put a pixel center exactly on the optical axis
        let view = ViewSpec {
            yaw_deg: rng.random_range(0.0..360.0),
            pitch_deg: rng.random_range(-60.0..60.0),
            hfov_deg: rng.random_range(10.0..150.0),
            width_px: 2 * rng.random_range(4..40u32) + 1,
            height_px: 2 * rng.random_range(4..40u32) + 1,
        };
        let rendered = render_view(&pano, &view).map_err(|e| e.to_string())?;
        let (cu, cv) = direction_to_pixel(
            &SphereDir {
                bearing_deg: view.yaw_deg,
                pitch_deg: view.pitch_deg,
            },
            &pano.meta,
        );
        let expected = bilinear_sample(&pano, cu, cv);
        let got = rendered
            .pixels
            .get_pixel(view.width_px / 2, view.height_px / 2)
            .0;
        ensure(got == expected, || {
            format!("case {case}: center {got:?} != {expected:?}")
        })?;

        let cy = view.height_px as f64 / 2.0;
        let axis = view.ray_through(view.width_px as f64 / 2.0, cy).unwrap();
        for u in [0.0, view.width_px as f64] {
            let edge = view.ray_through(u, cy).unwrap();
            worst_edge = worst_edge.max((angle_between(axis, edge) - view.hfov_deg / 2.0).abs());
        }
    }
    ensure(worst_edge <= 1e-9, || {
        format!("edge angle error {worst_edge:e} deg")
    })?;
    Ok(format!(
        "100 views byte-exact at center, edge angle error {worst_edge:.1e} deg"
    ))
}

/// Sum of squared perpendicular distances, the quantity the solver minimizes.
fn ls_cost(rays: &[Ray2D], p: &EnuPoint) -> f64 {
    rays.iter()
        .map(|r| r.perpendicular_distance(p).powi(2))
        .sum()
}

/// Coarse-to-fine grid search for the least-squares point, ending at a
/// 1 cm grid.
fn grid_search(rays: &[Ray2D], center: EnuPoint, half_extent: f64) -> EnuPoint {
    let mut best = center;
    let mut step = half_extent / 50.0;
    let mut extent = half_extent;
    loop {
        let n = (extent / step).ceil() as i64;
        let c = best;
        for i in -n..=n {
            for j in -n..=n {
                let p = EnuPoint::new(c.east_m + i as f64 * step, c.north_m + j as f64 * step);
                if ls_cost(rays, &p) < ls_cost(rays, &best) {
                    best = p;
                }
            }
        }
        if step <= 0.01 {
            return best;
        }
        extent = 3.0 * step;
        step = (step / 10.0).max(0.01);
    }
}

struct Config {
    origin: GeoPoint,
    target: EnuPoint,
    stations: Vec<EnuPoint>,
}

/// Three stations around a target at the given range, at least 15 degrees
/// apart as seen from the target.
fn random_config(rng: &mut StdRng, range: std::ops::Range<f64>) -> Config {
    let origin = GeoPoint::new(
        rng.random_range(-60.0..60.0),
        rng.random_range(-179.0..179.0),
    )
    .unwrap();
    let target = EnuPoint::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
    loop {
        let angles: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..360.0)).collect();
        let separated =
            (0..3).all(|i| (i + 1..3).all(|j| angle_diff(angles[i], angles[j]).abs() >= 15.0));
        if !separated {
            continue;
        }
        let stations = angles
            .iter()
            .map(|a| {
                let d = rng.random_range(range.clone());
                let r = a.to_radians();
                EnuPoint::new(target.east_m + d * r.sin(), target.north_m + d * r.cos())
            })
            .collect();
        return Config {
            origin,
            target,
            stations,
        };
    }
}

fn truth_rays(cfg: &Config) -> Vec<Ray2D> {
    let t = cfg.target;
    // a short wall whose base midpoint is the target
    let wall = Wall {
        p0: EnuPoint::new(t.east_m - 0.01, t.north_m),
        p1: EnuPoint::new(t.east_m + 0.01, t.north_m),
        height_m: 5.0,
        rgb: Rgb::new(200, 0, 0),
    };
    cfg.stations
        .iter()
        .map(|s| {
            let cam = enu_to_geo(&cfg.origin, s).unwrap();
            let bearing = ground_truth_bearing(&wall, &cam, &cfg.origin).unwrap();
            Ray2D::new(geo_to_enu(&cfg.origin, &cam).unwrap(), bearing)
        })
        .collect()
}

fn triangulation_accuracy() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst_exact: f64 = 0.0;
    for _ in 0..100 {
        let cfg = random_config(&mut rng, 10.0..50.0);
        let tri = triangulate_rays(&truth_rays(&cfg)).map_err(|e| e.to_string())?;
        worst_exact = worst_exact.max(tri.point.distance_to(&cfg.target));
    }
    ensure(worst_exact <= 0.01, || {
        format!("exact bearings: worst error {worst_exact:.4} m")
    })?;

    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut errors = Vec::new();
    let mut worst_grid: f64 = 0.0;
    for trial in 0..200 {
        let cfg = random_config(&mut rng, 10.0..30.0);
        let rays: Vec<Ray2D> = truth_rays(&cfg)
            .into_iter()
            .map(|r| Ray2D::new(r.origin, r.bearing_deg + noise.sample(&mut rng)))
            .collect();
        let Ok(tri) = triangulate_rays(&rays) else {
            continue;
        };
        errors.push(tri.point.distance_to(&cfg.target));
        if trial % 10 == 0 {
            let grid = grid_search(&rays, cfg.target, 25.0);
            worst_grid = worst_grid.max(grid.distance_to(&tri.point));
        }
    }
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    ensure(errors.len() >= 190, || {
        format!("only {} noisy trials solvable", errors.len())
    })?;
    ensure(median < 2.0, || format!("noisy median error {median:.3} m"))?;
    ensure(worst_grid <= 0.02, || {
        format!("solver vs 1 cm grid search differ by {worst_grid:.4} m")
    })?;
    Ok(format!(
        "exact worst {worst_exact:.1e} m; 0.5 deg noise median {median:.3} m over {} trials; grid check {worst_grid:.4} m",
        errors.len()
    ))
}

fn run_sample(out: &Path) -> Result<(ExtractionReport, Duration), String> {
    let scene = sample_scene_file();
    let fixture = out.join("fixture");
    let written = write_fixture(&scene, &fixture).map_err(|e| e.to_string())?;
    let config = PipelineConfig::new(
        written.photo_path.unwrap(),
        ProviderConfig::fixture(&fixture),
        DetectorSpec::chroma(scene.scene.walls[0].rgb),
        out.join("out"),
    );
    let start = Instant::now();
    let report = run_extraction(&config).map_err(|e| e.to_string())?;
    Ok((report, start.elapsed()))
}

fn end_to_end_centering() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (report, took) = run_sample(dir.path())?;
    let scene = sample_scene_file();
    ensure(report.status == ReportStatus::Ok, || {
        format!("status {:?}", report.status)
    })?;
    ensure(
        report.location_source == LocationSource::Triangulated,
        || format!("location source {:?}", report.location_source),
    )?;
    let found = geo_to_enu(&scene.scene.origin, &report.building_location).unwrap();
    let err = found.distance_to(&scene.scene.walls[0].midpoint());
    ensure(err <= 0.5, || {
        format!("building {err:.3} m from wall midpoint")
    })?;

    let mut worst: f64 = 0.0;
    for rec in &report.panos {
        let pass2 = rec
            .pass2
            .as_ref()
            .ok_or(format!("{}: no pass 2", rec.pano_id))?;
        let det = pass2
            .detection
            .as_ref()
            .ok_or(format!("{}: no pass-2 detection", rec.pano_id))?;
        let offset =
            (det.center().0 - pass2.view.width_px as f64 / 2.0).abs() / pass2.view.width_px as f64;
        worst = worst.max(offset);
        let crop = rec
            .crop_path
            .as_ref()
            .ok_or(format!("{}: no crop", rec.pano_id))?;
        ensure(dir.path().join("out").join(crop).is_file(), || {
            format!("{crop} missing")
        })?;
    }
    ensure(report.panos.len() == 3, || {
        format!("{} panoramas", report.panos.len())
    })?;
    ensure(worst <= 0.02, || {
        format!("pass-2 center offset {:.2}% of width", worst * 100.0)
    })?;
    Ok(format!(
        "location error {err:.3} m, worst center offset {:.2}% of width, pipeline {took:.2?}",
        worst * 100.0
    ))
}

fn reference_haversine(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (p1, p2) = (a.lat_deg().to_radians(), b.lat_deg().to_radians());
    let dp = p2 - p1;
    let dl = (b.lon_deg() - a.lon_deg()).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * 6_371_000.0 * h.sqrt().asin()
}

fn nearest_k_ordering() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let dir = tempfile::tempdir().unwrap();
    let png = panoview_core::raster::encode_png(&RgbImage::new(8, 4)).unwrap();
    for case in 0..50 {
        let fixture = dir.path().join(format!("f{case}"));
        std::fs::create_dir_all(&fixture).unwrap();
        std::fs::write(fixture.join("p.png"), &png).unwrap();
        let center = GeoPoint::new(
            rng.random_range(-70.0..70.0),
            rng.random_range(-180.0..180.0),
        )
        .unwrap();
        let n = rng.random_range(1..40);
        let entries: Vec<IndexEntry> = (0..n)
            .map(|i| {
                let p = enu_to_geo(
                    &center,
                    &EnuPoint::new(
                        rng.random_range(-300.0..300.0),
                        rng.random_range(-300.0..300.0),
                    ),
                )
                .unwrap();
                IndexEntry {
                    pano_id: format!("pano{i:03}"),
                    lat: p.lat_deg(),
                    lon: p.lon_deg(),
                    heading_deg: rng.random_range(0.0..360.0),
                    date: String::new(),
                    width_px: 8,
                    height_px: 4,
                    image: "p.png".into(),
                }
            })
            .collect();
        write_fixture_index(&fixture, &entries).unwrap();

        let k = rng.random_range(1..n + 3);
        let provider =
            FixtureProvider::open(&ProviderConfig::fixture(&fixture)).map_err(|e| e.to_string())?;
        let got: Vec<String> = provider
            .nearest_panoramas(&center, k)
            .map_err(|e| e.to_string())?
            .panoramas
            .into_iter()
            .map(|m| m.pano_id)
            .collect();

        let mut brute: Vec<(f64, String)> = entries
            .iter()
            .map(|e| {
                (
                    reference_haversine(&center, &GeoPoint::new(e.lat, e.lon).unwrap()),
                    e.pano_id.clone(),
                )
            })
            .collect();
        brute.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let want: Vec<String> = brute.into_iter().take(k).map(|(_, id)| id).collect();
        ensure(got == want, || format!("case {case}: {got:?} != {want:?}"))?;
    }
    Ok("50 random indexes match brute-force order".into())
}

fn geodesy_oracles() -> Outcome {
    let gp = |lat, lon| GeoPoint::new(lat, lon).unwrap();
    let checks = [
        (
            "haversine same point",
            haversine_distance(&gp(29.0, -97.0), &gp(29.0, -97.0)),
            0.0,
            0.0,
        ),
        (
            "haversine 1 deg lon at equator",
            haversine_distance(&gp(0.0, 0.0), &gp(0.0, 1.0)),
            111_194.93,
            0.01,
        ),
        (
            "haversine 0.001 deg lat",
            haversine_distance(&gp(28.020, -97.054), &gp(28.021, -97.054)),
            111.195,
            0.001,
        ),
        (
            "bearing north",
            initial_bearing(&gp(0.0, 0.0), &gp(1.0, 0.0)).unwrap(),
            0.0,
            1e-9,
        ),
        (
            "bearing east",
            initial_bearing(&gp(0.0, 0.0), &gp(0.0, 1.0)).unwrap(),
            90.0,
            1e-9,
        ),
        (
            "bearing at 50N",
            initial_bearing(&gp(50.0, 0.0), &gp(50.0, 1.0)).unwrap(),
            89.617,
            0.01,
        ),
    ];
    for (name, got, want, tol) in checks {
        ensure((got - want).abs() <= tol, || {
            format!("{name}: {got} vs {want} +/- {tol}")
        })?;
    }
    Ok(format!("{} oracle values within tolerance", checks.len()))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ra, _) = run_sample(a.path())?;
    run_sample(b.path())?;
    let read = |root: &Path, name: &str| std::fs::read(root.join("out").join(name)).unwrap();
    let mut compared = vec!["report.json".to_string()];
    compared.extend(ra.panos.iter().filter_map(|p| p.crop_path.clone()));
    ensure(compared.len() == 4, || {
        format!("expected 3 crops, got {}", compared.len() - 1)
    })?;
    for name in &compared {
        ensure(read(a.path(), name) == read(b.path(), name), || {
            format!("{name} differs")
        })?;
    }
    Ok(format!(
        "{} files byte-identical across runs",
        compared.len()
    ))
}
