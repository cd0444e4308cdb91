//! Sun elevation and azimuth for a location and instant.
//!
//! Medium-precision formulation from Meeus' low-accuracy solar coordinates as used
//! by the NOAA solar calculator: geometric mean longitude and anomaly, equation of
//! center, apparent longitude with a nutation/aberration term, then declination and
//! the equation of time feed a local hour angle. Against the full NREL SPA the error
//! is around 0.01 deg in both angles over 1950-2100. Elevation is geometric: no
//! atmospheric refraction is applied.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{normalize_degrees, GeoPosition};
use crate::time::{day_samples, DaySpan, Instant, Zone};

pub const MIN_YEAR: i32 = 1950;
pub const MAX_YEAR: i32 = 2100;

/// Sun direction: elevation above the horizon and azimuth clockwise from true north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarPosition {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
}

impl SolarPosition {
    /// Normalizes azimuth into [0, 360) and clamps elevation into [-90, 90].
    pub fn new(elevation_deg: f64, azimuth_deg: f64) -> Self {
        Self {
            elevation_deg: elevation_deg.clamp(-90.0, 90.0),
            azimuth_deg: normalize_degrees(azimuth_deg),
        }
    }

    pub fn is_up(&self) -> bool {
        self.elevation_deg > 0.0
    }
}

#[derive(Debug, Clone, Copy)]
struct SunCoordinates {
    declination_deg: f64,
    equation_of_time_min: f64,
}

fn julian_day(t: &Instant) -> f64 {
    t.unix_seconds() / 86_400.0 + 2_440_587.5
}

fn check_epoch(t: &Instant) -> Result<()> {
    let year = t.utc().year();
    if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
        return Err(Error::UnsupportedEpoch { year });
    }
    Ok(())
}

fn sun_coordinates(jd: f64) -> SunCoordinates {
    let t = (jd - 2_451_545.0) / 36_525.0;

    let mean_long = normalize_degrees(280.466_46 + t * (36_000.769_83 + t * 0.000_303_2));
    let mean_anom = 357.529_11 + t * (35_999.050_29 - 0.000_153_7 * t);
    let ecc = 0.016_708_634 - t * (0.000_042_037 + 0.000_000_126_7 * t);

    let m = mean_anom.to_radians();
    let center = m.sin() * (1.914_602 - t * (0.004_817 + 0.000_014 * t))
        + (2.0 * m).sin() * (0.019_993 - 0.000_101 * t)
        + (3.0 * m).sin() * 0.000_289;
    let true_long = mean_long + center;

    let omega = (125.04 - 1_934.136 * t).to_radians();
    let apparent_long = true_long - 0.005_69 - 0.004_78 * omega.sin();

    let mean_obliquity = 23.0 + (26.0 + (21.448 - t * (46.815 + t * (0.000_59 - t * 0.001_813))) / 60.0) / 60.0;
    let obliquity = mean_obliquity + 0.002_56 * omega.cos();

    let eps = obliquity.to_radians();
    let declination = (eps.sin() * apparent_long.to_radians().sin()).asin();

    let y = (eps / 2.0).tan().powi(2);
    let l0 = mean_long.to_radians();
    let eot_rad = y * (2.0 * l0).sin() - 2.0 * ecc * m.sin() + 4.0 * ecc * y * m.sin() * (2.0 * l0).cos()
        - 0.5 * y * y * (4.0 * l0).sin()
        - 1.25 * ecc * ecc * (2.0 * m).sin();

    SunCoordinates {
        declination_deg: declination.to_degrees(),
        equation_of_time_min: 4.0 * eot_rad.to_degrees(),
    }
}

/// Local hour angle in degrees, in (-180, 180], zero at solar transit.
fn hour_angle(site: GeoPosition, t: &Instant, coords: &SunCoordinates) -> f64 {
    let utc_minutes = t.unix_seconds().rem_euclid(86_400.0) / 60.0;
    let true_solar_minutes = utc_minutes + coords.equation_of_time_min + 4.0 * site.lon();
    let ha = normalize_degrees(true_solar_minutes / 4.0) - 180.0;
    if ha <= -180.0 {
        ha + 360.0
    } else {
        ha
    }
}

pub fn solar_position(site: GeoPosition, t: &Instant) -> Result<SolarPosition> {
    check_epoch(t)?;
    let coords = sun_coordinates(julian_day(t));
    let ha = hour_angle(site, t, &coords).to_radians();
    let lat = site.lat().to_radians();
    let dec = coords.declination_deg.to_radians();

    let cos_zenith = (lat.sin() * dec.sin() + lat.cos() * dec.cos() * ha.cos()).clamp(-1.0, 1.0);
    let elevation = 90.0 - cos_zenith.acos().to_degrees();

    // Azimuth measured from south then rotated to north-based clockwise.
    let azimuth = ha
        .sin()
        .atan2(ha.cos() * lat.sin() - dec.tan() * lat.cos())
        .to_degrees()
        + 180.0;

    Ok(SolarPosition::new(elevation, azimuth))
}

/// Instant of solar transit (hour angle zero) on the local civil `date`.
pub fn solar_noon(site: GeoPosition, date: NaiveDate, zone: &Zone) -> Result<Instant> {
    let mut t = zone.civil(date, 12, 0)?;
    check_epoch(&t)?;
    for _ in 0..4 {
        let coords = sun_coordinates(julian_day(&t));
        let ha = hour_angle(site, &t, &coords);
        // the sun moves 15 deg of hour angle per hour
        t = zone.at(t.plus_seconds(-ha * 240.0).utc());
        if ha.abs() < 1e-6 {
            break;
        }
    }
    Ok(t)
}

/// Sun positions across part of a local day, `step_s` seconds apart.
pub fn sun_path(
    site: GeoPosition,
    date: NaiveDate,
    zone: &Zone,
    span: DaySpan,
    step_s: f64,
) -> Result<Vec<(Instant, SolarPosition)>> {
    day_samples(date, zone, span, step_s)?
        .into_iter()
        .map(|t| solar_position(site, &t).map(|p| (t, p)))
        .collect()
}
