//! Motor bearing fault detection (MBFD) pipeline.
//!
//! The crate covers the full path from raw vibration recordings to accuracy
//! tables: dataset ingestion and segmentation ([`dataio`]), hand-crafted
//! time/frequency features ([`features`]), normalization transforms
//! ([`preprocess`]), the deep models and their losses ([`backbones`],
//! [`losses`], [`trainer`]), classical back-end classifiers ([`backend`]),
//! the published train/test split protocols ([`protocols`]), and the
//! experiment runner ([`harness`]).

pub mod backbones;
pub mod backend;
pub mod dataio;
pub mod error;
pub mod features;
pub mod harness;
pub mod losses;
pub mod nn;
pub mod preprocess;
pub mod protocols;
pub mod trainer;

pub use error::MbfdError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, MbfdError>;
