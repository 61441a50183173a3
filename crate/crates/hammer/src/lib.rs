//! Hammer: device discovery and over-the-wire Rune deployment, plus the
//! device simulator daemon that hosts RunicOS.

pub mod client;
pub mod daemon;
pub mod registry;
pub mod transport;
pub mod wire;
