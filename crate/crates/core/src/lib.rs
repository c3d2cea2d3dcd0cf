//! Persona-driven sensor sandbox.
//!
//! Pipeline: [`persona`] builds a lifestyle persona and its sensor footprint,
//! [`sensor_synth`] turns the footprint into a seeded multi-channel trace,
//! [`device_link`] speaks the spoof-injection protocol and hosts the simulated
//! device with its mock apps, [`session`] drives a device through a trace
//! while taking UI snapshots, and [`analysis`] summarizes and diffs those
//! snapshots.

pub mod geo;
pub mod llm;
pub mod persona;
pub mod sensor_synth;
pub mod device_link;
pub mod analysis;
pub mod session;
