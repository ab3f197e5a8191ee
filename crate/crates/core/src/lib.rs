//! Volumetric prognostics over chest-CT-like volumes: hand-crafted radiomics
//! features with classical classifiers, and a from-scratch 3D convolutional
//! network, evaluated with a matched 6-fold cross-validation protocol.

pub mod catalog;
pub mod classify;
pub mod clinical;
pub mod deepnet;
pub mod error;
pub mod eval;
pub mod intensity;
pub mod reduce;
pub mod synthio;
pub mod texture;
pub mod volume;

pub use error::{Error, Result};
