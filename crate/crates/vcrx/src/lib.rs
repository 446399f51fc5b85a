//! Secret common randomness extraction from correlated observations.
//!
//! Two parties observing correlated randomness (channel fading, radar
//! range-angle maps) train probabilistic quantizer encoders so that their
//! quantized symbols agree with high probability, are near-uniform, and leak
//! little to an eavesdropper; a Reed-Solomon code-offset secure sketch then
//! reconciles the residual mismatches into identical secret keys.
//!
//! Module map:
//!
//! - [`galois`]: GF(2^k) arithmetic and Reed-Solomon codes, k in 4..=7.
//! - [`sketch`]: code-offset secure sketch, key rate, leakage bound.
//! - [`sources`]: correlated-observation simulators (Gaussian fading,
//!   OFDM range-angle maps) and the eavesdropper models.
//! - [`netcore`]: minimal deterministic f64 MLP engine with analytic
//!   backprop and Adam/AdamW.
//! - [`vpq`]: the adversarial quantizer-training objective (mismatch loss,
//!   EMA uniformity loss, variational MI bounds, training loop).
//! - [`eval`]: held-out metrics and the end-to-end key experiment.
//! - [`cli`]: config parsing, dataset/model file formats, and the command
//!   implementations behind the `vcrx` binary.
//!
//! The `examples/` directory holds a runnable walkthrough of each major
//! capability, from field arithmetic up to the end-to-end key experiment;
//! `cargo run --example <name>` runs one.

pub mod cli;
pub mod eval;
pub mod galois;
pub mod netcore;
pub mod sketch;
pub mod sources;
pub mod vpq;
