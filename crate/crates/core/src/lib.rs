//! Forensic analysis of evidence recovered from a multirotor UAV.
//!
//! The pipeline follows acquisition (hash-verified case manifest),
//! examination (flight log, parameters, mission plan, battery, media) and
//! presentation (a JSON report with a Markdown projection).

pub mod case;
pub mod evidence;
pub mod geo;
pub mod media;
pub mod mission;
pub mod params;
pub mod power;
pub mod report;
pub mod synth;
pub mod track;
pub mod ulog;

pub use geo::GeoPoint;
