//! Code-independent error-floor estimates for quantized LDPC decoders.
//!
//! The crate evaluates an absorbing set decoder over every channel input on a
//! small sub-graph, collects the inputs that fail under chosen external-input
//! schedules, and turns that SNR-independent set into a probability curve.
//! A full-graph decoder and Monte-Carlo simulator are included to check the
//! estimates against real codes.

pub mod absorbing;
pub mod bound;
pub mod codes;
pub mod decoder;
pub mod error;
pub mod quantizer;
pub mod sim;

pub use error::{Error, Result};
