//! Leveled approximate-arithmetic homomorphic encryption over
//! `Z_Q[X]/(X^N + 1)` in RNS form.

mod ciphertext;
mod context;
mod encoding;
mod encryptor;
mod evaluator;
mod keys;
pub mod modarith;
pub mod ntt;
mod params;
mod poly;
pub mod sampling;

pub use ciphertext::{ciphertext_size, Ciphertext, Plaintext, CT_HEADER_LEN, CT_MAGIC, FORMAT_VERSION};
pub(crate) use ciphertext::{put_poly, put_u32, Reader};
pub use context::{noise_add, CkksContext};
pub use encoding::SlotEncoder;
pub use evaluator::poly_depth;
pub use keys::{gadget_times, PublicKey, RelinKey, SecretKey};
pub use params::{ChainSpec, CkksParams, Preset};
pub use poly::RnsPoly;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CkksError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("too many slots: {got} > {max}")]
    TooManySlots { got: usize, max: usize },
    #[error("invalid level {0}")]
    InvalidLevel(usize),
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: usize, right: usize },
    #[error("scale mismatch: {left} vs {right}")]
    ScaleMismatch { left: f64, right: f64 },
    #[error("level exhausted in {0}")]
    LevelExhausted(&'static str),
    #[error("insufficient levels: need {needed}, have {available}")]
    InsufficientLevels { needed: usize, available: usize },
    #[error("numeric overflow: {0}")]
    Overflow(String),
    #[error("serialization: {0}")]
    Serialization(String),
}
