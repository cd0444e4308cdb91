//! Driver/sun relative angles, the glare criterion, and daily glare windows.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{angular_distance, normalize_degrees, GeoPosition};
use crate::solar::{solar_noon, solar_position, SolarPosition};
use crate::time::{day_samples, DaySpan, Instant, Zone};

pub const DEFAULT_THRESHOLD_DEG: f64 = 25.0;
pub const DEFAULT_STEP_S: f64 = 60.0;
pub const MAX_SLOPE_DEG: f64 = 45.0;

/// Thresholds of the glare test. Both angular tests are strict (`<`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlareCriteria {
    /// Upper bound for both the horizontal and the vertical relative angle.
    pub threshold_deg: f64,
    /// The sun must be strictly above this elevation to glare.
    pub min_elevation_deg: f64,
}

impl Default for GlareCriteria {
    fn default() -> Self {
        Self {
            threshold_deg: DEFAULT_THRESHOLD_DEG,
            min_elevation_deg: 0.0,
        }
    }
}

impl GlareCriteria {
    /// Low-sun cutoff that reproduces the published Cambridge orientation table:
    /// hours with the sun at 1.4-1.8 deg are absent there while 2.2 deg is present.
    pub const TABLE_MIN_ELEVATION_DEG: f64 = 2.0;

    pub fn table() -> Self {
        Self {
            min_elevation_deg: Self::TABLE_MIN_ELEVATION_DEG,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_deg.is_finite() && self.threshold_deg > 0.0 && self.threshold_deg <= 180.0) {
            return Err(Error::invalid(format!("glare threshold {}", self.threshold_deg)));
        }
        if !self.min_elevation_deg.is_finite() {
            return Err(Error::invalid("minimum elevation must be finite"));
        }
        Ok(())
    }
}

/// Horizontal relative angle: minimal circular distance between sun azimuth and heading.
pub fn h_glare(sun_azimuth_deg: f64, heading_deg: f64) -> f64 {
    angular_distance(sun_azimuth_deg, heading_deg)
}

/// Vertical relative angle between the sun and the road grade. Not circular.
pub fn v_glare(sun_elevation_deg: f64, slope_deg: f64) -> f64 {
    (sun_elevation_deg - slope_deg).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverPose {
    pub position: GeoPosition,
    heading_deg: f64,
    slope_deg: f64,
}

impl DriverPose {
    pub fn new(position: GeoPosition, heading_deg: f64, slope_deg: f64) -> Result<Self> {
        if !heading_deg.is_finite() {
            return Err(Error::invalid("heading must be finite"));
        }
        if !(slope_deg.is_finite() && slope_deg.abs() < MAX_SLOPE_DEG) {
            return Err(Error::invalid(format!("road slope {slope_deg} deg")));
        }
        Ok(Self {
            position,
            heading_deg: normalize_degrees(heading_deg),
            slope_deg,
        })
    }

    pub fn flat(position: GeoPosition, heading_deg: f64) -> Result<Self> {
        Self::new(position, heading_deg, 0.0)
    }

    pub fn heading_deg(&self) -> f64 {
        self.heading_deg
    }

    pub fn slope_deg(&self) -> f64 {
        self.slope_deg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlareVerdict {
    pub sun: SolarPosition,
    pub geometric_glare: bool,
    pub h_glare_deg: f64,
    pub v_glare_deg: f64,
    pub obstructed: Option<bool>,
    pub final_glare: bool,
}

impl GlareVerdict {
    pub fn from_sun(pose: &DriverPose, sun: SolarPosition, criteria: &GlareCriteria) -> Self {
        let h = h_glare(sun.azimuth_deg, pose.heading_deg);
        let v = v_glare(sun.elevation_deg, pose.slope_deg);
        let geometric = sun.elevation_deg > criteria.min_elevation_deg.max(0.0)
            && h < criteria.threshold_deg
            && v < criteria.threshold_deg;
        Self {
            sun,
            geometric_glare: geometric,
            h_glare_deg: h,
            v_glare_deg: v,
            obstructed: None,
            final_glare: geometric,
        }
    }

    pub fn with_obstruction(mut self, obstructed: bool) -> Self {
        self.obstructed = Some(obstructed);
        self.final_glare = self.geometric_glare && !obstructed;
        self
    }
}

pub fn geometric_glare(pose: &DriverPose, t: &Instant, criteria: &GlareCriteria) -> Result<GlareVerdict> {
    criteria.validate()?;
    let sun = solar_position(pose.position, t)?;
    Ok(GlareVerdict::from_sun(pose, sun, criteria))
}

/// Set of street headings within `half_width_deg` of the sun azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationRange {
    pub center_deg: f64,
    pub half_width_deg: f64,
}

impl OrientationRange {
    /// Lower edge; un-wrapped so that `high - low` is always the width.
    pub fn low_deg(&self) -> f64 {
        self.center_deg - self.half_width_deg
    }

    pub fn high_deg(&self) -> f64 {
        self.center_deg + self.half_width_deg
    }

    pub fn width_deg(&self) -> f64 {
        2.0 * self.half_width_deg
    }

    /// Whether `heading_deg` lies strictly inside the range (modulo 360).
    pub fn contains(&self, heading_deg: f64) -> bool {
        angular_distance(heading_deg, self.center_deg) < self.half_width_deg
    }
}

/// Headings exposed to glare on a flat road at `t`, or `None` when the sun is
/// outside the glare elevation band.
pub fn orientation_range(site: GeoPosition, t: &Instant, criteria: &GlareCriteria) -> Result<Option<OrientationRange>> {
    criteria.validate()?;
    let sun = solar_position(site, t)?;
    Ok(orientation_range_for(&sun, criteria))
}

pub fn orientation_range_for(sun: &SolarPosition, criteria: &GlareCriteria) -> Option<OrientationRange> {
    let floor = criteria.min_elevation_deg.max(0.0);
    (sun.elevation_deg > floor && sun.elevation_deg < criteria.threshold_deg).then_some(OrientationRange {
        center_deg: sun.azimuth_deg,
        half_width_deg: criteria.threshold_deg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlareKind {
    Sunrise,
    Sunset,
}

impl fmt::Display for GlareKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GlareKind::Sunrise => "sunrise",
            GlareKind::Sunset => "sunset",
        })
    }
}

impl FromStr for GlareKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sunrise" => Ok(GlareKind::Sunrise),
            "sunset" => Ok(GlareKind::Sunset),
            other => Err(Error::invalid(format!("glare kind {other:?}"))),
        }
    }
}

/// Half-open interval `[start, end)` of glare, labelled by which side of solar noon it falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GlareWindow {
    pub start: Instant,
    pub end: Instant,
    pub kind: GlareKind,
}

impl GlareWindow {
    pub fn duration_s(&self) -> f64 {
        self.start.seconds_until(&self.end)
    }

    pub fn contains_window(&self, other: &GlareWindow) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// Decides whether the sun is hidden at an instant. Implementations must be
/// `Sync` so scans can be parallelized by callers.
pub trait ObstructionOracle: Sync {
    fn is_obstructed(&self, t: &Instant, sun: &SolarPosition) -> bool;
}

impl<F> ObstructionOracle for F
where
    F: Fn(&Instant, &SolarPosition) -> bool + Sync,
{
    fn is_obstructed(&self, t: &Instant, sun: &SolarPosition) -> bool {
        self(t, sun)
    }
}

/// Glare windows for one pose and day, with and without obstruction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DayScan {
    pub geometric: Vec<GlareWindow>,
    pub windows: Vec<GlareWindow>,
}

pub fn scan_day(
    pose: &DriverPose,
    date: NaiveDate,
    zone: &Zone,
    step_s: f64,
    criteria: &GlareCriteria,
    oracle: Option<&dyn ObstructionOracle>,
) -> Result<DayScan> {
    criteria.validate()?;
    let samples = day_samples(date, zone, DaySpan::full_day(), step_s)?;
    let noon = solar_noon(pose.position, date, zone)?;

    let mut geometric_flags = Vec::with_capacity(samples.len());
    let mut final_flags = Vec::with_capacity(samples.len());
    for t in &samples {
        let sun = solar_position(pose.position, t)?;
        let mut verdict = GlareVerdict::from_sun(pose, sun, criteria);
        if verdict.geometric_glare {
            if let Some(o) = oracle {
                verdict = verdict.with_obstruction(o.is_obstructed(t, &sun));
            }
        }
        geometric_flags.push(verdict.geometric_glare);
        final_flags.push(verdict.final_glare);
    }

    Ok(DayScan {
        geometric: merge_runs(&samples, &geometric_flags, step_s, &noon),
        windows: merge_runs(&samples, &final_flags, step_s, &noon),
    })
}

/// Glare windows for a pose over the local `date`, scanned at `step_s`.
pub fn glare_windows(
    pose: &DriverPose,
    date: NaiveDate,
    zone: &Zone,
    step_s: f64,
    criteria: &GlareCriteria,
    oracle: Option<&dyn ObstructionOracle>,
) -> Result<Vec<GlareWindow>> {
    scan_day(pose, date, zone, step_s, criteria, oracle).map(|s| s.windows)
}

fn merge_runs(samples: &[Instant], flags: &[bool], step_s: f64, noon: &Instant) -> Vec<GlareWindow> {
    let mut out = Vec::new();
    let mut run: Option<(Instant, Instant, GlareKind)> = None;
    for (t, &on) in samples.iter().zip(flags) {
        let kind = if t < noon {
            GlareKind::Sunrise
        } else {
            GlareKind::Sunset
        };
        let close = match run {
            Some((_, _, k)) => !on || k != kind,
            None => false,
        };
        if close {
            out.push(finish(run.take().unwrap(), step_s, noon));
        }
        if on {
            run = Some(match run {
                Some((start, _, k)) => (start, *t, k),
                None => (*t, *t, kind),
            });
        }
    }
    if let Some(r) = run {
        out.push(finish(r, step_s, noon));
    }
    out
}

fn finish((start, last, kind): (Instant, Instant, GlareKind), step_s: f64, noon: &Instant) -> GlareWindow {
    let mut end = last.plus_seconds(step_s);
    if kind == GlareKind::Sunrise && end > *noon {
        end = *noon;
    }
    GlareWindow {
        start,
        end: Instant::new(end.datetime().with_timezone(start.datetime().offset())),
        kind,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cambridge() -> GeoPosition {
        GeoPosition::new(-71.117, 42.376).unwrap()
    }

    fn date(m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2018, m, d).unwrap()
    }

    #[test]
    fn h_glare_examples() {
        assert_eq!(h_glare(125.87, 125.87), 0.0);
        assert_abs_diff_eq!(h_glare(350.0, 10.0), 20.0, epsilon = 1e-12);
        // published range [100.87, 150.87] is the 125.87 azimuth +/- 25
        assert!(h_glare(100.87, 75.88) < 25.0);
        assert!(h_glare(100.87, 125.86) < 25.0);
        assert!(h_glare(100.87, 125.88) >= 25.0);
        assert!(h_glare(100.87, 75.86) >= 25.0);
    }

    #[test]
    fn v_glare_examples() {
        assert_eq!(v_glare(20.0, 0.0), 20.0);
        assert_eq!(v_glare(24.5, 24.5), 0.0);
        assert_eq!(v_glare(10.0, -5.0), 15.0);
    }

    #[test]
    fn pose_validation() {
        assert!(DriverPose::new(cambridge(), 10.0, 45.0).is_err());
        assert!(DriverPose::new(cambridge(), f64::INFINITY, 0.0).is_err());
        assert_eq!(DriverPose::flat(cambridge(), -90.0).unwrap().heading_deg(), 270.0);
    }

    #[test]
    fn strict_threshold() {
        let pose = DriverPose::flat(cambridge(), 100.0).unwrap();
        let c = GlareCriteria::default();
        let at = |az, el| GlareVerdict::from_sun(&pose, SolarPosition::new(el, az), &c).geometric_glare;
        assert!(!at(125.0, 10.0));
        assert!(at(124.999, 10.0));
        assert!(!at(100.0, 25.0));
        assert!(at(100.0, 24.999));
        assert!(!at(100.0, 0.0));
    }

    #[test]
    fn verdict_invariants() {
        let pose = DriverPose::flat(cambridge(), 125.87).unwrap();
        let t = Instant::from_civil(2018, 1, 20, 8, 0, 0, -300).unwrap();
        let v = geometric_glare(&pose, &t, &GlareCriteria::default()).unwrap();
        assert!(v.geometric_glare && v.final_glare && v.obstructed.is_none());
        let blocked = v.with_obstruction(true);
        assert!(!blocked.final_glare && blocked.geometric_glare);
        assert!(v.with_obstruction(false).final_glare);
    }

    #[test]
    fn opposite_heading_and_night() {
        let c = GlareCriteria::default();
        let t = Instant::from_civil(2018, 1, 20, 8, 0, 0, -300).unwrap();
        let pose = DriverPose::flat(cambridge(), 305.87).unwrap();
        let v = geometric_glare(&pose, &t, &c).unwrap();
        assert!(!v.geometric_glare);
        assert!(v.h_glare_deg > 179.5);
        let night = Instant::from_civil(2018, 1, 20, 23, 0, 0, -300).unwrap();
        for h in (0..360).step_by(15) {
            let pose = DriverPose::flat(cambridge(), h as f64).unwrap();
            assert!(!geometric_glare(&pose, &night, &c).unwrap().geometric_glare);
        }
    }

    #[test]
    fn december_late_morning_range() {
        let t = Instant::from_civil(2018, 12, 20, 11, 0, 0, -300).unwrap();
        let r = orientation_range(cambridge(), &t, &GlareCriteria::default())
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(r.low_deg(), 144.52, epsilon = 1.0);
        assert_abs_diff_eq!(r.high_deg(), 194.52, epsilon = 1.0);
        assert_abs_diff_eq!(r.width_deg(), 50.0, epsilon = 1e-12);
    }

    #[test]
    fn june_midday_has_no_range() {
        let t = Instant::from_civil(2018, 6, 20, 12, 0, 0, -240).unwrap();
        assert!(orientation_range(cambridge(), &t, &GlareCriteria::default())
            .unwrap()
            .is_none());
    }

    #[test]
    fn january_windows_for_heading_126() {
        let pose = DriverPose::flat(cambridge(), 126.0).unwrap();
        let zone = Zone::us_eastern();
        let w = glare_windows(&pose, date(1, 20), &zone, 60.0, &GlareCriteria::default(), None).unwrap();
        assert_eq!(w.len(), 1, "{w:?}");
        assert_eq!(w[0].kind, GlareKind::Sunrise);
        let eight = zone.civil(date(1, 20), 8, 0).unwrap();
        assert!(w[0].start <= eight && eight < w[0].end);
    }

    #[test]
    fn polar_night_is_empty() {
        let pose = DriverPose::flat(GeoPosition::new(15.0, 80.0).unwrap(), 180.0).unwrap();
        let w = glare_windows(&pose, date(12, 20), &Zone::utc(), 60.0, &GlareCriteria::default(), None).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn always_obstructed_suppresses_everything() {
        let pose = DriverPose::flat(cambridge(), 290.0).unwrap();
        let blocked = |_: &Instant, _: &SolarPosition| true;
        let scan = scan_day(
            &pose,
            date(6, 20),
            &Zone::us_eastern(),
            60.0,
            &GlareCriteria::default(),
            Some(&blocked),
        )
        .unwrap();
        assert!(scan.windows.is_empty());
        assert!(!scan.geometric.is_empty());
    }

    #[test]
    fn windows_split_at_solar_noon() {
        // December sun never exceeds 25 deg in Cambridge, so a south-facing
        // driver sees glare straight through noon.
        let pose = DriverPose::flat(cambridge(), 180.0).unwrap();
        let zone = Zone::us_eastern();
        let w = glare_windows(&pose, date(12, 20), &zone, 60.0, &GlareCriteria::default(), None).unwrap();
        let noon = solar_noon(cambridge(), date(12, 20), &zone).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].kind, GlareKind::Sunrise);
        assert!(w[0].end <= noon);
        assert_eq!(w[1].kind, GlareKind::Sunset);
        assert!(w[1].start >= noon);
        assert!(w.iter().all(|x| x.start < x.end));
    }

    #[test]
    fn rejects_bad_step() {
        let pose = DriverPose::flat(cambridge(), 180.0).unwrap();
        assert!(glare_windows(&pose, date(1, 1), &Zone::utc(), 0.0, &GlareCriteria::default(), None).is_err());
    }
}
