//! Shared-dictionary convolutional sparse coding for visible/infrared
//! image fusion.
//!
//! The pipeline encodes a visible image against a dictionary learned jointly
//! on visible/infrared pairs, maps its coefficients to pseudo-infrared
//! coefficients, fuses both branches atom by atom and reconstructs.

pub mod afri;
pub mod error;
pub mod grid;
pub mod jsrl;
pub mod metrics;
pub mod solver;
pub mod synth;
pub mod vgii;

pub use error::{Error, Result};
