use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two rasters that must agree in size do not.
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// Raster too small for the requested operation.
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    /// Sample buffer length does not match `width * height * channels`.
    BufferLength {
        expected: usize,
        found: usize,
    },
    UnsupportedChannels(usize),
    /// Samples outside `[0, 1]` or not finite.
    OutOfRange {
        count: usize,
    },
    InvalidParameter(&'static str),
    /// Every pixel is masked, there is nothing to borrow from.
    NoSourcePixels,
    /// A masked region has no unmasked 4-neighbour at all.
    EmptySourceBoundary,
    ChannelMismatch {
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::TooSmall { width, height, min } => {
                write!(f, "raster {width}x{height} is smaller than the required {min}x{min}")
            }
            Error::BufferLength { expected, found } => {
                write!(f, "buffer holds {found} samples, expected {expected}")
            }
            Error::UnsupportedChannels(c) => write!(f, "unsupported channel count {c}"),
            Error::OutOfRange { count } => {
                write!(f, "{count} samples are not finite values in [0, 1]")
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::NoSourcePixels => f.write_str("mask covers every pixel, no source pixels left"),
            Error::EmptySourceBoundary => f.write_str("masked region has no source pixels on its boundary"),
            Error::ChannelMismatch { expected, found } => {
                write!(f, "channel mismatch: expected {expected}, found {found}")
            }
        }
    }
}

impl core::error::Error for Error {}
