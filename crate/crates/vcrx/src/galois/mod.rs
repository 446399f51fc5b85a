//! Arithmetic over GF(2^k) for k in 4..=7 and the Reed-Solomon codes
//! RS(q-1, m) used by the code-offset secure sketch.

mod field;
mod rs;

pub use field::{Field, FieldError, SUPPORTED_K};
pub use rs::{DecodeFailure, RsError, RsParams, SymbolSequence};
