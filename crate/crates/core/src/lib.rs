//! Learning probabilistic latent spaces over collections of deforming
//! triangle meshes that share one connectivity.
//!
//! Meshes are encoded relative to a reference mesh as rotation-invariant
//! features (per-vertex scale/shear plus per-edge log relative rotations),
//! normalized, and modelled with a fully connected variational autoencoder.
//! The trained model supports random generation, latent interpolation,
//! low-dimensional embedding and grid-based exploration.

pub mod align;
pub mod container;
pub mod corpus;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod nn;
pub mod obj;
pub mod ops;
pub mod rimd;
pub mod vae;

pub use error::{Error, Result};
pub use mesh::{ConnectivityKey, Mesh, Topology, Vec3};
