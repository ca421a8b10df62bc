//! Dense image-to-surface correspondence toolkit.
//!
//! Geometry ([`mesh`], [`parametrization`]), annotation support
//! ([`sampler`], [`render`]), evaluation ([`metrics`]), inference-side
//! decoding ([`decoder`], [`texture`]) and file formats ([`io`]).

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod mesh;
pub mod synthetic;
pub mod parametrization;
pub mod sampler;
pub mod render;
pub mod metrics;
pub mod decoder;
pub mod texture;
pub mod io;
