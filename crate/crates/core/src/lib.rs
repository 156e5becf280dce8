//! Certification of worst-case frequency-domain performance for networks of
//! locally controlled uncertain LTI subsystems whose parameter vectors live in
//! identification-style ellipsoids.
//!
//! The analysis runs in two levels. A local step embeds each subsystem's
//! uncertain frequency response into a disc and/or a band certified by small
//! LMI feasibility problems; a global step propagates those embeddings into a
//! multiplier LMI whose optimum is an upper bound on the network's worst-case
//! gain at each frequency of a user-supplied grid.

pub mod config;
pub mod embedding;
pub mod error;
pub mod global;
pub mod lti;
pub mod numerics;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod sdp;
pub mod uncertainty;

pub use error::{Error, Result};
