//! Hyperspectral degradation analysis: simulate classic HSI degradations,
//! summarize their spatial/spectral fingerprints as a six-metric degradation
//! prompt, and drive prompt-conditioned expert routing.
//!
//! The crate is organized around a plain band-sequential cube type:
//!
//! - [`cube`]: the [`cube::HsiCube`] container, a seeded synthetic scene
//!   generator, and the HSC binary format.
//! - [`degrade`]: seven seeded degradation operators (noise, blur,
//!   downsample/upsample, masking, band loss) behind one recipe type.
//! - [`metrics`]: the degradation-prompt metrics plus a registry of auxiliary
//!   candidates, all pure functions of a cube.
//! - [`select`]: Pearson de-correlation filter and a small random-forest
//!   classifier with Gini importances, used to rank candidate metrics.
//! - [`route`]: noisy top-k gating over degradation experts and the
//!   sigmoid-blended spatial/spectral fusion step, with an analytic gradient.
//! - [`eval`]: PSNR and band-averaged SSIM.
//!
//! Everything is deterministic given explicit seeds; nothing reads OS entropy.

pub mod cube;
pub mod degrade;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod rng;
pub mod route;
pub mod select;

pub use cube::HsiCube;
pub use error::{Error, Result};
