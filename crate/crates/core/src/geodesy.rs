//! Spherical-earth geodesy over short baselines.
//!
//! All global positions use a sphere of radius [`EARTH_RADIUS_M`]. Local work
//! (triangulation, synthetic scenes) happens in an East-North tangent plane
//! anchored at an explicit origin; the plane is only valid within
//! [`MAX_TANGENT_RANGE_M`] of that origin.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Offsets beyond this break the flat tangent-plane approximation.
pub const MAX_TANGENT_RANGE_M: f64 = 10_000.0;

/// Minimum spread between ray directions (degrees, modulo 180).
pub const MIN_RAY_SPREAD_DEG: f64 = 0.5;

const MIN_NORMAL_DET: f64 = 1e-9;

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_360(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Signed smallest difference `a - b` in degrees, in `(-180, 180]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_360(a - b);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// A position on the sphere. Longitude is normalized to `[-180, 180)` on
/// construction so equal places compare equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat_deg: f64,
    lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        if !lat_deg.is_finite() || !lon_deg.is_finite() {
            return Err(Error::InvalidCoordinate(format!(
                "non-finite coordinate ({lat_deg}, {lon_deg})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(Error::InvalidCoordinate(format!(
                "latitude {lat_deg} outside [-90, 90]"
            )));
        }
        Ok(Self {
            lat_deg,
            lon_deg: normalize_lon(lon_deg),
        })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }
}

fn normalize_lon(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        return lon;
    }
    let l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l >= 180.0 {
        -180.0
    } else {
        l
    }
}

/// Formats a coordinate with its shortest round-trip representation, padded
/// with trailing zeros to at least 9 significant digits.
pub(crate) fn format_degrees(v: f64) -> String {
    let mut s = format!("{v}");
    let digits = s
        .chars()
        .filter(|c| c.is_ascii_digit())
        .skip_while(|&c| c == '0')
        .count();
    if digits < 9 {
        if !s.contains('.') {
            s.push('.');
        }
        // all-zero values have no significant digits; pad their fraction
        let pad = if digits == 0 { 9 } else { 9 - digits };
        s.extend(std::iter::repeat_n('0', pad));
    }
    s
}

impl Serialize for GeoPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::{Error as _, SerializeStruct};
        let num = |v: f64| {
            format_degrees(v)
                .parse::<serde_json::Number>()
                .map_err(S::Error::custom)
        };
        let mut st = serializer.serialize_struct("GeoPoint", 2)?;
        st.serialize_field("lat_deg", &num(self.lat_deg)?)?;
        st.serialize_field("lon_deg", &num(self.lon_deg)?)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for GeoPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lat_deg: f64,
            lon_deg: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        GeoPoint::new(raw.lat_deg, raw.lon_deg).map_err(serde::de::Error::custom)
    }
}

/// Meters east and north of some origin [`GeoPoint`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnuPoint {
    pub east_m: f64,
    pub north_m: f64,
}

impl EnuPoint {
    pub const ORIGIN: EnuPoint = EnuPoint {
        east_m: 0.0,
        north_m: 0.0,
    };

    pub fn new(east_m: f64, north_m: f64) -> Self {
        Self { east_m, north_m }
    }

    pub fn norm(&self) -> f64 {
        self.east_m.hypot(self.north_m)
    }

    pub fn distance_to(&self, other: &EnuPoint) -> f64 {
        (self.east_m - other.east_m).hypot(self.north_m - other.north_m)
    }

    /// Bearing in degrees, clockwise from north, of the vector from `self`
    /// to `other`.
    pub fn bearing_to(&self, other: &EnuPoint) -> f64 {
        wrap_360(
            (other.east_m - self.east_m)
                .atan2(other.north_m - self.north_m)
                .to_degrees(),
        )
    }
}

/// A bearing ray in the tangent plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray2D {
    pub origin: EnuPoint,
    pub bearing_deg: f64,
}

impl Ray2D {
    pub fn new(origin: EnuPoint, bearing_deg: f64) -> Self {
        Self {
            origin,
            bearing_deg: wrap_360(bearing_deg),
        }
    }

    /// Unit direction as (east, north).
    pub fn direction(&self) -> (f64, f64) {
        let b = self.bearing_deg.to_radians();
        (b.sin(), b.cos())
    }

    /// Perpendicular distance from `p` to the infinite line carrying the ray.
    pub fn perpendicular_distance(&self, p: &EnuPoint) -> f64 {
        let (de, dn) = self.direction();
        let (qe, qn) = (
            p.east_m - self.origin.east_m,
            p.north_m - self.origin.north_m,
        );
        (qe * dn - qn * de).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangulationResult {
    pub point: EnuPoint,
    pub rms_residual_m: f64,
    pub ray_count: usize,
}

/// Great-circle distance in meters (haversine formula).
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (p1, p2) = (a.lat_deg.to_radians(), b.lat_deg.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon_deg - a.lon_deg).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Forward azimuth from `a` to `b` in `[0, 360)`.
pub fn initial_bearing(a: &GeoPoint, b: &GeoPoint) -> Result<f64> {
    if haversine_distance(a, b) <= 1e-9 {
        return Err(Error::DegenerateGeometry(
            "bearing between coincident points".into(),
        ));
    }
    let (p1, p2) = (a.lat_deg.to_radians(), b.lat_deg.to_radians());
    let dl = (b.lon_deg - a.lon_deg).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    Ok(wrap_360(y.atan2(x).to_degrees()))
}

fn meters_per_degree() -> f64 {
    EARTH_RADIUS_M * std::f64::consts::PI / 180.0
}

/// Projects `p` onto the East-North tangent plane at `origin`.
pub fn geo_to_enu(origin: &GeoPoint, p: &GeoPoint) -> Result<EnuPoint> {
    let d = haversine_distance(origin, p);
    if d >= MAX_TANGENT_RANGE_M {
        return Err(Error::OutOfTangentRange { distance_m: d });
    }
    let dlon = angle_diff(p.lon_deg, origin.lon_deg);
    let m = meters_per_degree();
    Ok(EnuPoint {
        east_m: dlon * m * origin.lat_deg.to_radians().cos(),
        north_m: (p.lat_deg - origin.lat_deg) * m,
    })
}

/// Inverse of [`geo_to_enu`].
pub fn enu_to_geo(origin: &GeoPoint, e: &EnuPoint) -> Result<GeoPoint> {
    let d = e.norm();
    if !d.is_finite() || d >= MAX_TANGENT_RANGE_M {
        return Err(Error::OutOfTangentRange { distance_m: d });
    }
    let m = meters_per_degree();
    let cos_lat = origin.lat_deg.to_radians().cos();
    if cos_lat.abs() < 1e-12 && e.east_m != 0.0 {
        return Err(Error::DegenerateGeometry(
            "east offset at a pole is undefined".into(),
        ));
    }
    let dlon = if e.east_m == 0.0 {
        0.0
    } else {
        e.east_m / (m * cos_lat)
    };
    GeoPoint::new(origin.lat_deg + e.north_m / m, origin.lon_deg + dlon)
}

/// Least-squares intersection of bearing lines.
///
/// Minimizes the summed squared perpendicular distance to every line by
/// solving the 2×2 normal equations `Σ(I − d dᵀ) x = Σ(I − d dᵀ) p`.
pub fn triangulate_rays(rays: &[Ray2D]) -> Result<TriangulationResult> {
    if rays.len() < 2 {
        return Err(Error::InsufficientRays(rays.len()));
    }

    let max_spread = rays
        .iter()
        .enumerate()
        .flat_map(|(i, a)| rays[i + 1..].iter().map(move |b| (a, b)))
        .map(|(a, b)| {
            // lines, not rays: 0 and 180 are parallel
            let d = (a.bearing_deg - b.bearing_deg).rem_euclid(180.0);
            d.min(180.0 - d)
        })
        .fold(0.0_f64, f64::max);
    if max_spread < MIN_RAY_SPREAD_DEG {
        return Err(Error::DegenerateGeometry(format!(
            "rays are parallel (max spread {max_spread:.3} deg)"
        )));
    }

    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    let (mut b1, mut b2) = (0.0, 0.0);
    for ray in rays {
        let (de, dn) = ray.direction();
        let (p11, p12, p22) = (1.0 - de * de, -de * dn, 1.0 - dn * dn);
        let (pe, pn) = (ray.origin.east_m, ray.origin.north_m);
        a11 += p11;
        a12 += p12;
        a22 += p22;
        b1 += p11 * pe + p12 * pn;
        b2 += p12 * pe + p22 * pn;
    }

    let det = a11 * a22 - a12 * a12;
    if det.abs() < MIN_NORMAL_DET {
        return Err(Error::DegenerateGeometry(format!(
            "singular normal matrix (det {det:e})"
        )));
    }
    let point = EnuPoint {
        east_m: (a22 * b1 - a12 * b2) / det,
        north_m: (a11 * b2 - a12 * b1) / det,
    };

    let sum_sq: f64 = rays
        .iter()
        .map(|r| r.perpendicular_distance(&point).powi(2))
        .sum();
    Ok(TriangulationResult {
        point,
        rms_residual_m: (sum_sq / rays.len() as f64).sqrt(),
        ray_count: rays.len(),
    })
}
