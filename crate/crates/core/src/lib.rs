//! Numerical laboratory for the solution space of cycle-consistent
//! translation losses.
//!
//! - [`probspace`]: finite spaces, gridded densities, seeded samples
//! - [`maps`]: measurable maps, automorphism constructors, push-forwards
//! - [`divergence`]: f-divergences and the push-forward identity check
//! - [`cycleloss`]: pure and extended loss evaluation
//! - [`kernel`]: exact solutions on finite spaces and the automorphism action
//! - [`perturbation`]: perturbation bound and its asymptotic form
//! - [`trainer`]: discriminator-free toy training and solution classification

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cycleloss;
pub mod divergence;
pub mod error;
pub mod kernel;
pub mod maps;
pub mod net;
pub mod perturbation;
pub mod probspace;
pub mod trainer;

pub use error::{Error, Result};
