use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::Result;
use crate::geo::GeoPosition;
use crate::glare::{orientation_range_for, GlareCriteria, GlareKind, OrientationRange};
use crate::solar::{solar_noon, solar_position};
use crate::time::Zone;

pub const TABLE_FIRST_HOUR: u32 = 5;
pub const TABLE_LAST_HOUR: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlareTableRow {
    pub date: NaiveDate,
    /// Local clock hour, 0-23.
    pub hour: u32,
    pub kind: GlareKind,
    pub range: OrientationRange,
}

impl GlareTableRow {
    /// `8 am, [100.87, 150.87]`
    pub fn label(&self) -> String {
        format!(
            "{}, [{:.2}, {:.2}]",
            clock_label(self.hour),
            self.range.low_deg(),
            self.range.high_deg()
        )
    }
}

pub fn clock_label(hour: u32) -> String {
    match hour {
        0 => "12 am".into(),
        1..=11 => format!("{hour} am"),
        12 => "12 pm".into(),
        _ => format!("{} pm", hour - 12),
    }
}

/// Flat-road orientation ranges at each whole local hour from 05:00 to 20:00.
pub fn build_glare_table(
    site: GeoPosition,
    dates: &[NaiveDate],
    zone: &Zone,
    criteria: &GlareCriteria,
) -> Result<Vec<GlareTableRow>> {
    let mut rows = Vec::new();
    for &date in dates {
        let noon = solar_noon(site, date, zone)?;
        for hour in TABLE_FIRST_HOUR..=TABLE_LAST_HOUR {
            let t = zone.civil(date, hour, 0)?;
            let sun = solar_position(site, &t)?;
            if let Some(range) = orientation_range_for(&sun, criteria) {
                let kind = if t < noon {
                    GlareKind::Sunrise
                } else {
                    GlareKind::Sunset
                };
                rows.push(GlareTableRow {
                    date,
                    hour,
                    kind,
                    range,
                });
            }
        }
    }
    Ok(rows)
}

/// Tab-separated rendering: date, sunrise column, sunset column, one line per
/// pair of rows in the style of a two-column table.
pub fn format_glare_table(rows: &[GlareTableRow]) -> String {
    let mut out = String::from("date\tsunrise (time, range)\tsunset (time, range)\n");
    let mut dates: Vec<NaiveDate> = rows.iter().map(|r| r.date).collect();
    dates.dedup();
    for date in dates {
        let pick = |k| {
            rows.iter()
                .filter(|r| r.date == date && r.kind == k)
                .collect::<Vec<_>>()
        };
        let (rise, set) = (pick(GlareKind::Sunrise), pick(GlareKind::Sunset));
        for i in 0..rise.len().max(set.len()) {
            let d = if i == 0 {
                date.format("%Y-%m-%d").to_string()
            } else {
                String::new()
            };
            let cell = |v: &Vec<&GlareTableRow>| v.get(i).map(|r| r.label()).unwrap_or_default();
            let _ = writeln!(out, "{d}\t{}\t{}", cell(&rise), cell(&set));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_labels() {
        assert_eq!(clock_label(8), "8 am");
        assert_eq!(clock_label(12), "12 pm");
        assert_eq!(clock_label(20), "8 pm");
    }

    #[test]
    fn january_has_three_and_three() {
        let site = GeoPosition::new(-71.117, 42.376).unwrap();
        let d = NaiveDate::from_ymd_opt(2018, 1, 20).unwrap();
        let rows = build_glare_table(site, &[d], &Zone::us_eastern(), &GlareCriteria::default()).unwrap();
        let hours: Vec<u32> = rows.iter().map(|r| r.hour).collect();
        assert_eq!(hours, [8, 9, 10, 14, 15, 16]);
        assert_eq!(rows.iter().filter(|r| r.kind == GlareKind::Sunrise).count(), 3);
        let text = format_glare_table(&rows);
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("8 am, [100.8"), "{text}");
    }
}
