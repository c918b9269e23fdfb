//! Slot-synchronized random-number matching (RNM) over a noisy channel:
//! codec, detectors, error accounting, energy and spectrum models, and a
//! deterministic Monte Carlo runner.

pub mod channel_model;
pub mod detectors;
pub mod energy_model;
pub mod error;
pub mod error_analysis;
pub mod exec;
pub mod experiment;
pub mod feedback_codec;
pub mod rnm_codec;
pub mod spectrum;
pub mod sync_rng;

pub use error::{Result, SimError};
pub use exec::Execution;
pub use rnm_codec::{Message, PpmConfig, RnmConfig};
pub use sync_rng::{RngSeed, SlotIndex, SyncRng};
