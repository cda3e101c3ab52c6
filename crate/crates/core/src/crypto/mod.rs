//! Canonical serialization, SHA-256 digests and Ed25519 signatures.
//!
//! Every integrity guarantee in the crate reduces to three primitives:
//! a byte-exact canonical form for structured values, a SHA-256 [`Digest`]
//! of those bytes, and a detached Ed25519 [`Signature`] over them.

mod canonical;
mod hash;
mod sign;

pub use canonical::{
    canonicalize, detached_payload, parse, to_canonical, CanonicalBytes, CanonicalError,
};
pub use hash::{sha256, sha256_raw, Digest, DigestError};
pub use sign::{sign, sign_raw, verify, verify_raw, CryptoError, KeyPair, Signature};
