pub mod analysis;
pub mod ansatz;
pub mod bitphase;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod rng;
pub mod targets;

pub use error::{QicError, Result};
