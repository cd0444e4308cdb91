//! Positions and spherical-earth geodesy.
//!
//! Distances use a spherical earth with the IUGG mean radius. At city scale the
//! difference from the ellipsoid is well under a decimeter per 40 m hop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// IUGG mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Longitude/latitude in degrees. Construction validates ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPosition", into = "RawPosition")]
pub struct GeoPosition {
    lon: f64,
    lat: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPosition {
    lon: f64,
    lat: f64,
}

impl TryFrom<RawPosition> for GeoPosition {
    type Error = Error;
    fn try_from(raw: RawPosition) -> Result<Self> {
        GeoPosition::new(raw.lon, raw.lat)
    }
}

impl From<GeoPosition> for RawPosition {
    fn from(p: GeoPosition) -> Self {
        RawPosition { lon: p.lon, lat: p.lat }
    }
}

impl GeoPosition {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !(lon.is_finite() && lat.is_finite()) || !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidPosition { lon, lat });
        }
        Ok(Self { lon, lat })
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }
}

/// Wraps an angle into [0, 360).
pub fn normalize_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Minimal circular distance between two directions, in [0, 180].
pub fn angular_distance(a_deg: f64, b_deg: f64) -> f64 {
    let d = normalize_degrees(a_deg - b_deg);
    d.min(360.0 - d)
}

/// Great-circle distance in meters (haversine).
pub fn distance_m(a: GeoPosition, b: GeoPosition) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `a` to `b`, clockwise from true north in [0, 360).
pub fn bearing(a: GeoPosition, b: GeoPosition) -> Result<f64> {
    if a == b {
        return Err(Error::invalid("bearing between identical points is undefined"));
    }
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlon = (b.lon - a.lon).to_radians();
    let y = dlon.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    Ok(normalize_degrees(y.atan2(x).to_degrees()))
}

/// Point at `fraction` of the way along the great circle from `a` to `b`.
pub fn interpolate(a: GeoPosition, b: GeoPosition, fraction: f64) -> GeoPosition {
    let delta = distance_m(a, b) / EARTH_RADIUS_M;
    if delta < 1e-15 {
        return a;
    }
    let (lat1, lon1) = (a.lat.to_radians(), a.lon.to_radians());
    let (lat2, lon2) = (b.lat.to_radians(), b.lon.to_radians());
    let wa = ((1.0 - fraction) * delta).sin() / delta.sin();
    let wb = (fraction * delta).sin() / delta.sin();
    let x = wa * lat1.cos() * lon1.cos() + wb * lat2.cos() * lon2.cos();
    let y = wa * lat1.cos() * lon1.sin() + wb * lat2.cos() * lon2.sin();
    let z = wa * lat1.sin() + wb * lat2.sin();
    let lat = z.atan2((x * x + y * y).sqrt()).to_degrees();
    let lon = y.atan2(x).to_degrees();
    GeoPosition {
        lon: wrap_lon(lon),
        lat: lat.clamp(-90.0, 90.0),
    }
}

/// Point reached by travelling `distance` meters from `origin` along `bearing_deg`.
pub fn destination(origin: GeoPosition, bearing_deg: f64, distance: f64) -> GeoPosition {
    let delta = distance / EARTH_RADIUS_M;
    let theta = bearing_deg.to_radians();
    let lat1 = origin.lat.to_radians();
    let lon1 = origin.lon.to_radians();
    let lat2 = (lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * theta.cos()).asin();
    let lon2 = lon1 + (theta.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * lat2.sin());
    GeoPosition {
        lon: wrap_lon(lon2.to_degrees()),
        lat: lat2.to_degrees().clamp(-90.0, 90.0),
    }
}

fn wrap_lon(lon: f64) -> f64 {
    let l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l < -180.0 {
        l + 360.0
    } else {
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(lon: f64, lat: f64) -> GeoPosition {
        GeoPosition::new(lon, lat).unwrap()
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPosition::new(181.0, 0.0).is_err());
        assert!(GeoPosition::new(0.0, -90.5).is_err());
        assert!(GeoPosition::new(f64::NAN, 0.0).is_err());
        assert!(GeoPosition::new(-180.0, 90.0).is_ok());
    }

    #[test]
    fn cardinal_bearings() {
        assert_abs_diff_eq!(bearing(p(10.0, 40.0), p(10.0, 41.0)).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(bearing(p(0.0, 0.0), p(1.0, 0.0)).unwrap(), 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(bearing(p(0.0, 1.0), p(0.0, 0.0)).unwrap(), 180.0, epsilon = 1e-9);
        assert_abs_diff_eq!(bearing(p(1.0, 0.0), p(0.0, 0.0)).unwrap(), 270.0, epsilon = 1e-9);
    }

    #[test]
    fn identical_points_have_no_bearing() {
        assert!(bearing(p(3.0, 3.0), p(3.0, 3.0)).is_err());
    }

    #[test]
    fn cambridge_northeast_bearing() {
        // Planar estimate: atan2(0.001 * cos(42.3765 deg), 0.001) = 36.45 deg.
        let b = bearing(p(-71.117, 42.376), p(-71.116, 42.377)).unwrap();
        assert!(b > 30.0 && b < 45.0, "{b}");
        assert_abs_diff_eq!(b, 36.45, epsilon = 0.05);
    }

    #[test]
    fn destination_round_trips_distance() {
        let o = p(-71.1, 42.37);
        let d = destination(o, 57.0, 40.0);
        assert_abs_diff_eq!(distance_m(o, d), 40.0, epsilon = 1e-6);
        assert_abs_diff_eq!(bearing(o, d).unwrap(), 57.0, epsilon = 1e-6);
    }

    #[test]
    fn interpolate_midpoint() {
        let a = p(-71.12, 42.37);
        let b = destination(a, 123.0, 100.0);
        let m = interpolate(a, b, 0.4);
        assert_abs_diff_eq!(distance_m(a, m), 40.0, epsilon = 1e-6);
        assert_abs_diff_eq!(distance_m(m, b), 60.0, epsilon = 1e-6);
    }

    #[test]
    fn circular_distance() {
        assert_eq!(angular_distance(350.0, 10.0), 20.0);
        assert_eq!(angular_distance(10.0, 350.0), 20.0);
        assert_eq!(angular_distance(0.0, 180.0), 180.0);
        assert_eq!(normalize_degrees(-1e-20), 0.0);
    }
}
