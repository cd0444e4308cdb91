//! C ABI for the sunglare toolkit.
//!
//! Conventions:
//! - every fallible function returns an [`SgStatus`]; results go through out
//!   pointers that are written only on success;
//! - the message for the most recent failure on the calling thread is
//!   available from [`sg_last_error_message`];
//! - handles ([`SgPanorama`], [`SgWindowList`]) are opaque, owned by the
//!   caller once returned, and released with their `_free` function;
//! - instants are Unix seconds (UTC); zones are strings such as `"UTC"`,
//!   `"-05:00"` or `"America/New_York"` (NULL means UTC);
//! - panics never cross the boundary; they surface as `SG_STATUS_PANIC`.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chrono::NaiveDate;
use sunglare::glare::{self, DriverPose, GlareCriteria, GlareKind, GlareVerdict, GlareWindow};
use sunglare::panorama::{self, MaskSource, ObstructionMask, PanoramaFrame, PanoramaObstruction};
use sunglare::solar::{self, SolarPosition};
use sunglare::time::{Instant, Zone};
use sunglare::{Error, GeoPosition};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnsupportedEpoch = 3,
    InvalidFrame = 4,
    InvalidMask = 5,
    OutOfRange = 6,
    Panic = 7,
    Internal = 8,
}

impl From<&Error> for SgStatus {
    fn from(e: &Error) -> Self {
        match e.category() {
            "invalid-argument" => SgStatus::InvalidArgument,
            "unsupported-epoch" => SgStatus::UnsupportedEpoch,
            "invalid-frame" => SgStatus::InvalidFrame,
            "invalid-mask" => SgStatus::InvalidMask,
            _ => SgStatus::Internal,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgSolarPosition {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgGlareVerdict {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub h_glare_deg: f64,
    pub v_glare_deg: f64,
    pub geometric_glare: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgOrientationRange {
    pub low_deg: f64,
    pub high_deg: f64,
    pub center_deg: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgGlareKind {
    Sunrise = 0,
    Sunset = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgGlareWindow {
    pub start_unix: f64,
    pub end_unix: f64,
    pub kind: SgGlareKind,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgPixel {
    pub x: f64,
    pub y: f64,
}

/// Glare criteria; pass NULL for the defaults (25 deg threshold, no extra
/// low-sun cutoff).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgCriteria {
    pub threshold_deg: f64,
    pub min_elevation_deg: f64,
}

/// Opaque panorama frame plus obstruction mask.
pub struct SgPanorama {
    inner: PanoramaObstruction,
}

/// Opaque list of glare windows.
pub struct SgWindowList {
    windows: Vec<GlareWindow>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: SgStatus, msg: impl Into<String>) -> SgStatus {
    set_last_error(msg);
    status
}

fn from_error(e: Error) -> SgStatus {
    let status = SgStatus::from(&e);
    fail(status, e.to_string())
}

/// Runs `f` with panics contained and errors recorded.
fn guard(f: impl FnOnce() -> Result<(), SgStatus>) -> SgStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(SgStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, SgStatus>;
}

impl<T> OrStatus<T> for sunglare::Result<T> {
    fn or_status(self) -> Result<T, SgStatus> {
        self.map_err(from_error)
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), SgStatus> {
    if p.is_null() {
        Err(fail(SgStatus::NullPointer, format!("{name} is NULL")))
    } else {
        Ok(())
    }
}

fn instant(unix_seconds: f64) -> Result<Instant, SgStatus> {
    Instant::from_unix_seconds(unix_seconds, 0).or_status()
}

fn read_criteria(c: *const SgCriteria) -> Result<GlareCriteria, SgStatus> {
    let c = if c.is_null() {
        GlareCriteria::default()
    } else {
        // SAFETY: non-null and the caller guarantees it points to an SgCriteria.
        let c = unsafe { *c };
        GlareCriteria {
            threshold_deg: c.threshold_deg,
            min_elevation_deg: c.min_elevation_deg,
        }
    };
    c.validate().or_status()?;
    Ok(c)
}

/// # Safety
/// `zone` is NULL or a valid NUL-terminated string.
unsafe fn read_zone(zone: *const c_char) -> Result<Zone, SgStatus> {
    if zone.is_null() {
        return Ok(Zone::utc());
    }
    let s = CStr::from_ptr(zone)
        .to_str()
        .map_err(|_| fail(SgStatus::InvalidArgument, "zone is not UTF-8"))?;
    s.parse().or_status()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is no error. Pass `buf = NULL` to query the length.
///
/// # Safety
/// `buf` is NULL or points to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Geometric sun position (no refraction) at a site and instant.
///
/// # Safety
/// `out` is NULL or points to writable memory for one `SgSolarPosition`.
#[no_mangle]
pub unsafe extern "C" fn sg_solar_position(
    lon_deg: f64,
    lat_deg: f64,
    unix_seconds: f64,
    out: *mut SgSolarPosition,
) -> SgStatus {
    guard(|| {
        non_null(out, "out")?;
        let site = GeoPosition::new(lon_deg, lat_deg).or_status()?;
        let sun = solar::solar_position(site, &instant(unix_seconds)?).or_status()?;
        *out = SgSolarPosition {
            elevation_deg: sun.elevation_deg,
            azimuth_deg: sun.azimuth_deg,
        };
        Ok(())
    })
}

/// Horizontal angle between sun azimuth and heading, in [0, 180].
#[no_mangle]
pub extern "C" fn sg_h_glare(sun_azimuth_deg: f64, heading_deg: f64) -> f64 {
    glare::h_glare(sun_azimuth_deg, heading_deg)
}

/// Vertical angle between sun elevation and road slope.
#[no_mangle]
pub extern "C" fn sg_v_glare(sun_elevation_deg: f64, slope_deg: f64) -> f64 {
    glare::v_glare(sun_elevation_deg, slope_deg)
}

/// Glare from geometry alone for a driver pose at an instant.
///
/// # Safety
/// `criteria` is NULL or valid; `out` points to one writable `SgGlareVerdict`.
#[no_mangle]
pub unsafe extern "C" fn sg_geometric_glare(
    lon_deg: f64,
    lat_deg: f64,
    heading_deg: f64,
    slope_deg: f64,
    unix_seconds: f64,
    criteria: *const SgCriteria,
    out: *mut SgGlareVerdict,
) -> SgStatus {
    guard(|| {
        non_null(out, "out")?;
        let c = read_criteria(criteria)?;
        let site = GeoPosition::new(lon_deg, lat_deg).or_status()?;
        let pose = DriverPose::new(site, heading_deg, slope_deg).or_status()?;
        let v: GlareVerdict = glare::geometric_glare(&pose, &instant(unix_seconds)?, &c).or_status()?;
        *out = SgGlareVerdict {
            elevation_deg: v.sun.elevation_deg,
            azimuth_deg: v.sun.azimuth_deg,
            h_glare_deg: v.h_glare_deg,
            v_glare_deg: v.v_glare_deg,
            geometric_glare: v.geometric_glare,
        };
        Ok(())
    })
}

/// Flat-road headings exposed to glare. `*has_range` is false when the sun is
/// outside the glare elevation band, and `out` is then left untouched.
///
/// # Safety
/// `criteria` is NULL or valid; `out` and `has_range` point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn sg_orientation_range(
    lon_deg: f64,
    lat_deg: f64,
    unix_seconds: f64,
    criteria: *const SgCriteria,
    out: *mut SgOrientationRange,
    has_range: *mut bool,
) -> SgStatus {
    guard(|| {
        non_null(out, "out")?;
        non_null(has_range, "has_range")?;
        let c = read_criteria(criteria)?;
        let site = GeoPosition::new(lon_deg, lat_deg).or_status()?;
        match glare::orientation_range(site, &instant(unix_seconds)?, &c).or_status()? {
            Some(r) => {
                *out = SgOrientationRange {
                    low_deg: r.low_deg(),
                    high_deg: r.high_deg(),
                    center_deg: r.center_deg,
                };
                *has_range = true;
            }
            None => *has_range = false,
        }
        Ok(())
    })
}

/// Glare windows over one local day for a driver pose, optionally hidden by a
/// panorama's obstruction mask (`panorama` may be NULL).
///
/// # Safety
/// `zone` is NULL or a NUL-terminated string; `criteria` is NULL or valid;
/// `panorama` is NULL or a live handle; `out` points to a writable pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sg_glare_windows(
    lon_deg: f64,
    lat_deg: f64,
    heading_deg: f64,
    slope_deg: f64,
    year: i32,
    month: u32,
    day: u32,
    zone: *const c_char,
    step_s: f64,
    criteria: *const SgCriteria,
    panorama: *const SgPanorama,
    out: *mut *mut SgWindowList,
) -> SgStatus {
    guard(|| {
        non_null(out, "out")?;
        let c = read_criteria(criteria)?;
        let z = read_zone(zone)?;
        let date = NaiveDate::from_ymd_opt(year, month, day)
            .ok_or_else(|| fail(SgStatus::InvalidArgument, format!("invalid date {year}-{month}-{day}")))?;
        let site = GeoPosition::new(lon_deg, lat_deg).or_status()?;
        let pose = DriverPose::new(site, heading_deg, slope_deg).or_status()?;
        let oracle = panorama.as_ref().map(|p| &p.inner as &dyn glare::ObstructionOracle);
        let windows = glare::glare_windows(&pose, date, &z, step_s, &c, oracle).or_status()?;
        *out = Box::into_raw(Box::new(SgWindowList { windows }));
        Ok(())
    })
}

/// Number of windows in the list (0 for NULL).
///
/// # Safety
/// `list` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_window_list_len(list: *const SgWindowList) -> usize {
    list.as_ref().map_or(0, |l| l.windows.len())
}

/// # Safety
/// `list` is a live handle and `out` points to one writable `SgGlareWindow`.
#[no_mangle]
pub unsafe extern "C" fn sg_window_list_get(
    list: *const SgWindowList,
    index: usize,
    out: *mut SgGlareWindow,
) -> SgStatus {
    guard(|| {
        non_null(list, "list")?;
        non_null(out, "out")?;
        let l = &*list;
        let w = l.windows.get(index).ok_or_else(|| {
            fail(
                SgStatus::OutOfRange,
                format!("index {index} out of range for {} windows", l.windows.len()),
            )
        })?;
        *out = SgGlareWindow {
            start_unix: w.start.unix_seconds(),
            end_unix: w.end.unix_seconds(),
            kind: match w.kind {
                GlareKind::Sunrise => SgGlareKind::Sunrise,
                GlareKind::Sunset => SgGlareKind::Sunset,
            },
        };
        Ok(())
    })
}

/// # Safety
/// `list` is NULL or a handle from `sg_glare_windows` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_window_list_free(list: *mut SgWindowList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

/// Creates a panorama handle from a 2:1 label raster (row-major, `width *
/// height` bytes). Pixels equal to `sky_label` are open sky.
///
/// # Safety
/// `labels` points to `labels_len` readable bytes; `out` to a writable pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sg_panorama_new(
    lon_deg: f64,
    lat_deg: f64,
    yaw_deg: f64,
    tilt_deg: f64,
    width: u32,
    height: u32,
    labels: *const u8,
    labels_len: usize,
    sky_label: u8,
    out: *mut *mut SgPanorama,
) -> SgStatus {
    guard(|| {
        non_null(labels, "labels")?;
        non_null(out, "out")?;
        let expected = width as usize * height as usize;
        if labels_len != expected {
            return Err(fail(
                SgStatus::InvalidMask,
                format!("labels_len {labels_len} does not match {width}x{height}"),
            ));
        }
        let raster = std::slice::from_raw_parts(labels, labels_len).to_vec();
        let site = GeoPosition::new(lon_deg, lat_deg).or_status()?;
        let mask =
            ObstructionMask::new(width, height, raster, BTreeSet::from([sky_label]), MaskSource::Model).or_status()?;
        let frame = PanoramaFrame::new("ffi", site, yaw_deg, tilt_deg, 2000, 1, width, height).or_status()?;
        let inner = PanoramaObstruction::new(frame, mask).or_status()?;
        *out = Box::into_raw(Box::new(SgPanorama { inner }));
        Ok(())
    })
}

/// Pixel where the sun appears. `*inside` is false when it falls outside the
/// vertical field of view.
///
/// # Safety
/// `panorama` is a live handle; `out` and `inside` point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn sg_panorama_project_sun(
    panorama: *const SgPanorama,
    sun_elevation_deg: f64,
    sun_azimuth_deg: f64,
    out: *mut SgPixel,
    inside: *mut bool,
) -> SgStatus {
    guard(|| {
        non_null(panorama, "panorama")?;
        non_null(out, "out")?;
        non_null(inside, "inside")?;
        let sun = SolarPosition::new(sun_elevation_deg, sun_azimuth_deg);
        match panorama::project_sun((*panorama).inner.frame(), &sun).or_status()? {
            Some(p) => {
                *out = SgPixel { x: p.x, y: p.y };
                *inside = true;
            }
            None => *inside = false,
        }
        Ok(())
    })
}

/// Whether the sun is hidden by a non-sky pixel (true at or below the horizon).
///
/// # Safety
/// `panorama` is a live handle; `out` points to a writable bool.
#[no_mangle]
pub unsafe extern "C" fn sg_panorama_is_obstructed(
    panorama: *const SgPanorama,
    sun_elevation_deg: f64,
    sun_azimuth_deg: f64,
    out: *mut bool,
) -> SgStatus {
    guard(|| {
        non_null(panorama, "panorama")?;
        non_null(out, "out")?;
        let sun = SolarPosition::new(sun_elevation_deg, sun_azimuth_deg);
        *out = (*panorama).inner.obstructed(&sun);
        Ok(())
    })
}

/// # Safety
/// `panorama` is NULL or a handle from `sg_panorama_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_panorama_free(panorama: *mut SgPanorama) {
    if !panorama.is_null() {
        drop(Box::from_raw(panorama));
    }
}
