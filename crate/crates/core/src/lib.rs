//! Safe active exploration for a robot that adapts an online model of a
//! simulated human.
//!
//! The robot learns the human's dynamics with belief-space recursive least
//! squares ([`adapt`]), chooses reference controls under a risk preference
//! ([`explore`]), and filters them through an uncertainty-aware energy
//! function monitor ([`safety`]). [`world`] runs the closed loop and
//! [`experiment`] drives batches of episodes.

pub mod adapt;
pub mod config;
pub mod error;
pub mod experiment;
pub mod explore;
pub mod human;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod safety;
pub mod world;

pub use error::{Error, Result};
