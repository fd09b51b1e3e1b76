//! Frugal 5G access network in simulation: an LTE macro cell operated in
//! Wi-Fi emulation mode, native Wi-Fi APs behind a wireless middle mile, and
//! a fog-resident layered SDN controller, all driven by a deterministic
//! discrete-event engine.
//!
//! The crate splits along the network's own seams:
//!
//! - [`frames`] — the 802.11-style MAC frames both RATs exchange
//! - [`lte`] — RRC, radio bearers and the MBMS multicast leg of the macro cell
//! - [`emu`] — the Wi-Fi emulation layers (UE side and eNB side)
//! - [`wlan`] — native APs/stations and the abstract AP interface
//! - [`controller`] — RAT-agnostic flow placement, handover, paths, energy
//! - [`interworking`] — northbound face: auth, forwarding, AN–CN sync
//! - [`sim`] — event engine, scenario files, trace and metrics
//!
//! The `frugal5g` binary loads a scenario file, runs it and writes the trace
//! and metrics; see the repository README.

pub mod controller;
pub mod digest;
pub mod emu;
pub mod frames;
pub mod ids;
pub mod interworking;
pub mod lte;
pub mod sim;
pub mod wlan;
