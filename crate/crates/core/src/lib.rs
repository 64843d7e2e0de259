//! Random scalar-input ReLU networks as linear splines.
//!
//! The crate builds random dense ReLU networks `R -> R`, propagates them
//! exactly as continuous piecewise-linear functions, rewrites single-layer
//! networks in forward-facing canonical form, and treats that form as an
//! integrated random walk. A deterministic Monte Carlo harness aggregates
//! knot counts, root counts, zero crossings, variances and bias gradients.
//!
//! ```
//! use splinewalk::netgen::{sample_network, network_knot_count, NetConfig};
//!
//! let cfg = NetConfig::uniform(vec![10]);
//! let net = sample_network(&cfg, 1, 0).unwrap();
//! assert_eq!(network_knot_count(&net), 10);
//! ```

pub mod canonical;
pub mod error;
pub mod experiments;
pub mod gradients;
pub mod irw;
pub mod netgen;
pub mod pwl;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use pwl::{Interval, PwlFunction};
