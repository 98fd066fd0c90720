//! Deterministic electronic-nose simulation core.
//!
//! The crate models a five-element MOX gas sensor array end to end:
//! steady-state sensitivity and first-order dynamics ([`gas`]), the
//! chamber sampling protocol ([`protocol`]), data acquisition and
//! feature extraction ([`daq`]), gas identification by response-curve
//! fitting ([`classifier`]), and a simulated CAN telemetry bus
//! ([`can`]). Everything is a pure function of its inputs; runs with
//! the same configuration and seed are byte-identical.

pub mod can;
pub mod classifier;
pub mod daq;
pub mod gas;
pub mod protocol;

pub use gas::{GasMixture, GasSpecies, SensorModel, SensorSpec};
