//! Cascaded channel estimation for IRS-assisted multi-user uplink, exploiting the
//! fact that every BS antenna sees a scaled copy of the same user-side channels.
//!
//! The crate covers channel generation ([`channel_model`]), training schedules and
//! received-signal synthesis ([`protocol`]), exact noiseless recovery ([`recovery`]),
//! LMMSE estimation ([`lmmse`]), the user-correlation benchmark ([`benchmark`]) and a
//! seeded Monte Carlo harness ([`experiment`]).

pub mod benchmark;
pub mod channel_model;
pub mod config;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod lmmse;
pub mod matrix_io;
pub mod metrics;
pub mod protocol;
pub mod recovery;
pub mod units;

pub use channel_model::{derive_cascaded, sample_channels, CascadedChannels, ChannelRealization, CorrelationSpec, SystemDims};
pub use config::{Allocation, ExperimentConfig, Scheme};
pub use error::{Error, Result};
pub use experiment::{run_sweep, ResultRow, SweepOptions};
pub use protocol::{min_durations, MinDurations, ObservationSet, TrainingSchedule};
