use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("year {year} is outside the supported ephemeris window 1950-2100")]
    UnsupportedEpoch { year: i32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid position: lon={lon}, lat={lat}")]
    InvalidPosition { lon: f64, lat: f64 },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("invalid metadata for {pano_id}: {reason}")]
    InvalidMetadata { pano_id: String, reason: String },

    #[error("transport failure ({url}): {reason}")]
    Transport {
        url: String,
        reason: String,
        retriable: bool,
    },

    #[error("malformed response from {source_ref}: {reason}")]
    Parse { source_ref: String, reason: String },

    #[error("incomplete panorama {pano_id}: missing tile x={x} y={y} zoom={zoom}")]
    IncompletePanorama { pano_id: String, x: u32, y: u32, zoom: u32 },

    #[error("stitch error for {pano_id}: {reason}")]
    Stitch { pano_id: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable category, used by the CLI and the C ABI.
    pub fn category(&self) -> &'static str {
        match self {
            Error::UnsupportedEpoch { .. } => "unsupported-epoch",
            Error::InvalidArgument(_) | Error::InvalidPosition { .. } => "invalid-argument",
            Error::InvalidFrame(_) => "invalid-frame",
            Error::InvalidMask(_) => "invalid-mask",
            Error::InvalidMetadata { .. } => "invalid-metadata",
            Error::Transport { .. } => "transport",
            Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => "parse",
            Error::IncompletePanorama { .. } => "incomplete-panorama",
            Error::Stitch { .. } => "stitch",
            Error::Config(_) => "config",
            Error::Io { .. } | Error::Image(_) => "io",
        }
    }

    /// Process exit status for this error; 1 and 2 are left to generic
    /// failures and usage errors.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "invalid-argument" => 3,
            "unsupported-epoch" => 4,
            "invalid-frame" | "invalid-mask" | "invalid-metadata" => 5,
            "transport" | "incomplete-panorama" | "stitch" => 6,
            "parse" => 7,
            "config" => 8,
            _ => 9,
        }
    }

    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Transport { retriable: true, .. })
    }
}
