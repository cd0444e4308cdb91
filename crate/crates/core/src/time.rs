//! Instants with explicit UTC offsets and the zones that produce them.

use std::fmt;
use std::str::FromStr;

use chrono::{
    DateTime, Datelike, Duration, FixedOffset, LocalResult, NaiveDate, NaiveDateTime, NaiveTime, Offset, TimeZone,
    Timelike, Utc,
};

use crate::error::{Error, Result};

/// A civil date-time carrying its UTC offset.
///
/// Equality and ordering are by absolute time, so `08:00-05:00` equals `13:00Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instant(DateTime<FixedOffset>);

impl Instant {
    pub fn new(dt: DateTime<FixedOffset>) -> Self {
        Self(dt)
    }

    /// Builds an instant from local civil components and an offset in minutes east of UTC.
    pub fn from_civil(
        year: i32,
        month: u32,
        day: u32,
        hour: u32,
        minute: u32,
        second: u32,
        offset_minutes: i32,
    ) -> Result<Self> {
        let offset = FixedOffset::east_opt(offset_minutes * 60)
            .ok_or_else(|| Error::invalid(format!("UTC offset {offset_minutes} min")))?;
        let naive = NaiveDate::from_ymd_opt(year, month, day)
            .and_then(|d| d.and_hms_opt(hour, minute, second))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "civil time {year}-{month:02}-{day:02} {hour:02}:{minute:02}:{second:02}"
                ))
            })?;
        match offset.from_local_datetime(&naive) {
            LocalResult::Single(dt) => Ok(Self(dt)),
            _ => Err(Error::invalid("unrepresentable civil time")),
        }
    }

    pub fn from_utc(dt: DateTime<Utc>) -> Self {
        Self(dt.fixed_offset())
    }

    pub fn datetime(&self) -> DateTime<FixedOffset> {
        self.0
    }

    pub fn utc(&self) -> DateTime<Utc> {
        self.0.with_timezone(&Utc)
    }

    pub fn offset_minutes(&self) -> i32 {
        self.0.offset().local_minus_utc() / 60
    }

    /// Same absolute instant expressed at another offset.
    pub fn with_offset_minutes(&self, offset_minutes: i32) -> Result<Self> {
        let offset = FixedOffset::east_opt(offset_minutes * 60)
            .ok_or_else(|| Error::invalid(format!("UTC offset {offset_minutes} min")))?;
        Ok(Self(self.0.with_timezone(&offset)))
    }

    pub fn unix_seconds(&self) -> f64 {
        let utc = self.utc();
        utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9
    }

    pub fn from_unix_seconds(secs: f64, offset_minutes: i32) -> Result<Self> {
        let whole = secs.floor();
        let nanos = ((secs - whole) * 1e9).round().min(999_999_999.0) as u32;
        let utc = DateTime::<Utc>::from_timestamp(whole as i64, nanos)
            .ok_or_else(|| Error::invalid(format!("timestamp {secs}")))?;
        Self::from_utc(utc).with_offset_minutes(offset_minutes)
    }

    pub fn local_date(&self) -> NaiveDate {
        self.0.date_naive()
    }

    pub fn local_hour(&self) -> u32 {
        self.0.hour()
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }

    pub fn plus_seconds(&self, secs: f64) -> Self {
        let nanos = (secs * 1e9).round() as i64;
        Self(self.0 + Duration::nanoseconds(nanos))
    }

    /// Seconds from `self` to `other` (positive when `other` is later).
    pub fn seconds_until(&self, other: &Instant) -> f64 {
        let d = other.0.signed_duration_since(self.0);
        d.num_milliseconds() as f64 / 1000.0
    }
}

impl fmt::Display for Instant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%dT%H:%M:%S%:z"))
    }
}

impl serde::Serialize for Instant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Instant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for Instant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DateTime::parse_from_rfc3339(s)
            .map(Instant)
            .map_err(|e| Error::invalid(format!("instant {s:?}: {e}")))
    }
}

/// Maps civil time to UTC offsets: either a fixed offset or an IANA zone with DST rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Zone {
    Fixed(FixedOffset),
    Named(chrono_tz::Tz),
}

impl Zone {
    pub fn utc() -> Self {
        Zone::Fixed(FixedOffset::east_opt(0).unwrap())
    }

    pub fn fixed_minutes(offset_minutes: i32) -> Result<Self> {
        FixedOffset::east_opt(offset_minutes * 60)
            .map(Zone::Fixed)
            .ok_or_else(|| Error::invalid(format!("UTC offset {offset_minutes} min")))
    }

    /// US Eastern civil time (EST/EDT).
    pub fn us_eastern() -> Self {
        Zone::Named(chrono_tz::America::New_York)
    }

    /// Resolves a local civil date-time; on DST folds the earlier instant wins,
    /// in gaps the time is pushed forward by the gap length.
    pub fn resolve(&self, local: NaiveDateTime) -> Result<Instant> {
        match self {
            Zone::Fixed(off) => match off.from_local_datetime(&local) {
                LocalResult::Single(dt) => Ok(Instant(dt)),
                _ => Err(Error::invalid(format!("unrepresentable local time {local}"))),
            },
            Zone::Named(tz) => {
                let resolved = match tz.from_local_datetime(&local) {
                    LocalResult::Single(dt) => Some(dt),
                    LocalResult::Ambiguous(early, _) => Some(early),
                    LocalResult::None => tz.from_local_datetime(&(local + Duration::hours(1))).earliest(),
                };
                resolved
                    .map(|dt| Instant(dt.fixed_offset()))
                    .ok_or_else(|| Error::invalid(format!("unrepresentable local time {local}")))
            }
        }
    }

    pub fn civil(&self, date: NaiveDate, hour: u32, minute: u32) -> Result<Instant> {
        let time = NaiveTime::from_hms_opt(hour, minute, 0)
            .ok_or_else(|| Error::invalid(format!("clock time {hour}:{minute}")))?;
        self.resolve(date.and_time(time))
    }

    /// Expresses an absolute UTC time with this zone's offset at that moment.
    pub fn at(&self, utc: DateTime<Utc>) -> Instant {
        match self {
            Zone::Fixed(off) => Instant(utc.with_timezone(off)),
            Zone::Named(tz) => {
                let off = tz.offset_from_utc_datetime(&utc.naive_utc()).fix();
                Instant(utc.with_timezone(&off))
            }
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Zone::Fixed(off) => write!(f, "{off}"),
            Zone::Named(tz) => write!(f, "{}", tz.name()),
        }
    }
}

impl FromStr for Zone {
    type Err = Error;

    /// Accepts `UTC`, `+HH:MM` / `-HH:MM`, or an IANA name such as `America/New_York`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("utc") || s.eq_ignore_ascii_case("z") {
            return Ok(Zone::utc());
        }
        if let Some(rest) = s.strip_prefix(['+', '-']) {
            let sign = if s.starts_with('-') { -1 } else { 1 };
            let (h, m) = rest.split_once(':').unwrap_or((rest, "0"));
            let h: i32 = h.parse().map_err(|_| Error::invalid(format!("zone {s:?}")))?;
            let m: i32 = m.parse().map_err(|_| Error::invalid(format!("zone {s:?}")))?;
            return Zone::fixed_minutes(sign * (h * 60 + m));
        }
        s.parse::<chrono_tz::Tz>()
            .map(Zone::Named)
            .map_err(|e| Error::invalid(format!("zone {s:?}: {e}")))
    }
}

/// Part of a local day, as seconds after local midnight (both ends inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DaySpan {
    pub start_s: u32,
    pub end_s: u32,
}

impl DaySpan {
    pub fn full_day() -> Self {
        Self {
            start_s: 0,
            end_s: 86_399,
        }
    }

    pub fn hours(from: u32, to: u32) -> Self {
        Self {
            start_s: from * 3600,
            end_s: to * 3600,
        }
    }
}

/// Instants from `span.start` to `span.end` of the local `date`, `step_s` seconds apart.
pub fn day_samples(date: NaiveDate, zone: &Zone, span: DaySpan, step_s: f64) -> Result<Vec<Instant>> {
    if !(step_s.is_finite() && step_s > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {step_s}")));
    }
    if span.end_s < span.start_s {
        return Err(Error::invalid("day span ends before it starts"));
    }
    let midnight = date.and_hms_opt(0, 0, 0).expect("midnight exists");
    let start = zone.resolve(midnight + Duration::seconds(i64::from(span.start_s)))?;
    let length = f64::from(span.end_s - span.start_s);
    let count = (length / step_s + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let utc = start.plus_seconds(i as f64 * step_s).utc();
            zone.at(utc)
        })
        .collect())
}
