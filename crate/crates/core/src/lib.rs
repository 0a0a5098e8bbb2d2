//! Core model for a transit mode-shift scenario study.
//!
//! The crate is organised along the pipeline:
//!
//! * [`gtfs`] — static GTFS ingest (bus schedules, service calendars, headways)
//! * [`network`] — road network interchange format and free-flow shortest paths
//! * [`demand`] — OD calibration and seeded trip synthesis from temporal profiles
//! * [`scenario`] — the utilisation-shift arithmetic (the study's core tables)
//! * [`sim`] — mesoscopic point-queue day simulation for mixed car/bus traffic
//! * [`emissions`] — speed-dependent CO2 integration over simulated trajectories
//!
//! Everything is deterministic: the only randomness is a caller-supplied seed
//! fed to a ChaCha stream, and the simulator orders events totally.

pub mod demand;
pub mod emissions;
pub mod gtfs;
pub mod network;
pub mod rng;
pub mod scenario;
pub mod sim;

#[cfg(feature = "testkit")]
pub mod testkit;
