//! Frame and bit error rate estimation for LDPC codes under hard-decision
//! iterative decoding on the binary symmetric channel.
//!
//! The pipeline enumerates the lightest error patterns the decoder cannot
//! correct, extrapolates their contribution to heavier weights in closed
//! form, and calibrates the two free parameters against short Monte Carlo
//! runs.

pub mod cli;
pub mod code;
pub mod combin;
pub mod decoder;
pub mod enumeration;
pub mod error;
pub mod estimation;
pub mod failure;
pub mod simulation;

pub use code::{load_alist, DegreeDistribution, TannerGraph};
pub use decoder::{check_syndrome, DecodeTrace, Decoder, DecoderConfig, ErrorPattern};
pub use error::{Error, Result};
