//! Library surface of the gabpfix binary: CLI definition, CDMA instance
//! generation, the experiment drivers, and report/trace serialization.
//! The binary in `main.rs` is a thin dispatcher over these modules; tests
//! drive them directly.

pub mod args;
pub mod cdma;
pub mod experiments;
pub mod report;
