//! Multipath angle-of-arrival estimation for small microphone arrays.
//!
//! The crate estimates the bearings of a direct path and its strongest
//! reflections from a short multichannel recording. [`subaoa::run`] finds
//! them one at a time, projecting each detected direction out of the data
//! before searching again. Delay-and-sum, GCC-PHAT and MUSIC are provided
//! for comparison, along with a simulator with known ground truth.

pub mod baselines;
pub mod error;
pub mod frontend;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod sim;
pub mod spectrum;
pub mod subaoa;

pub use error::{Error, Result};
pub use frontend::{FrequencyBand, MultichannelRecording, SnapshotTensor, StftConfig};
pub use geometry::{AngleGrid, MicArray, Sector};
pub use sim::{PathSpec, Scenario, SourceKind};
pub use spectrum::{Algorithm, Spectrum};
pub use subaoa::{SubAoaConfig, SubAoaOutput};
