//! GNSS antenna-array multipath detection.
//!
//! A five-antenna array yields an attitude estimate from carrier phases alone.
//! Satellites whose phases disagree with the consensus attitude are flagged as
//! multipath-contaminated ([`detector`]), and the surviving observations feed
//! per-antenna single point positioning ([`spp`]) and an unscented Kalman
//! filter on SO(3)×R¹² ([`ukf`]). The [`obs_sim`] module generates synthetic
//! observations in an urban canyon to exercise the whole chain.

pub mod attitude;
pub mod constellation;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod frames;
pub mod ingest;
pub mod obs_sim;
pub mod so3;
pub mod spp;
pub mod ukf;

pub use error::{Error, Result};
