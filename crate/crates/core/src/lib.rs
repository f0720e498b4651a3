//! State-vector simulation and exhaustive verification of multiparty
//! controlled teleportation of an arbitrary `N`-qubit state over `N-1` EPR
//! pairs and one `(M+2)`-qubit GHZ state.
//!
//! - [`statevector`]: dense simulator, Bell and computational-basis measurements.
//! - [`tables`]: printed and oracle-derived correction tables.
//! - [`protocol`]: the six-step session, transcripts, replay.
//! - [`verify`]: branch enumeration, correction oracle, reconciliation.
//! - [`cli`]: the `mcqt` command-line driver and its JSON reports.

pub mod cli;
pub mod error;
pub mod protocol;
pub mod statevector;
pub mod tables;
pub mod verify;

pub use error::{Error, Result};
pub use protocol::{Branch, MessageState, ProtocolConfig, RegisterLayout, Transcript};
pub use statevector::{BellOutcome, Pauli, StateVector};
pub use tables::{CorrectionTable, EprVariant, Parity, TableSource};
