//! Sun glare prediction for drivers.
//!
//! Glare is predicted from solar geometry (where the sun is relative to the
//! driver's heading and road slope) and, where street-level panoramas exist,
//! from whether buildings or trees hide the sun along the driver's line of
//! sight. The crate covers the full pipeline: road sampling, panorama
//! acquisition, obstruction masks, per-site glare windows and city maps.

pub mod acquisition;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod geo;
pub mod glare;
pub mod mapper;
pub mod panorama;
pub mod sampler;
pub mod solar;
pub mod time;

pub use error::{Error, Result};
pub use geo::GeoPosition;
pub use glare::{DriverPose, GlareCriteria, GlareKind, GlareWindow};
pub use panorama::{ObstructionMask, PanoramaFrame, PanoramaObstruction};
pub use solar::{solar_position, SolarPosition};
pub use time::{Instant, Zone};
