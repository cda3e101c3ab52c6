use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CanonicalBytes;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("malformed verification key ({0} bytes or not a curve point)")]
    MalformedKey(usize),
    #[error("malformed signature ({0} bytes)")]
    MalformedSignature(usize),
}

/// An Ed25519 key pair derived from a 32-byte seed.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    secret: [u8; 32],
    public: [u8; 32],
}

impl KeyPair {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        let public = SigningKey::from_bytes(&seed).verifying_key().to_bytes();
        Self { secret: seed, public }
    }

    pub fn public(&self) -> &[u8; 32] {
        &self.public
    }

    pub fn public_hex(&self) -> String {
        hex::encode(self.public)
    }

    pub fn seed(&self) -> &[u8; 32] {
        &self.secret
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public_hex()).finish_non_exhaustive()
    }
}

/// A detached Ed25519 signature plus the verification method that made it.
///
/// The byte string is kept unvalidated so that truncated or padded
/// signatures read from disk surface as [`CryptoError::MalformedSignature`]
/// at verification time instead of failing to load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub signer: String,
    #[serde(serialize_with = "hex_out", deserialize_with = "hex_in")]
    pub value: Vec<u8>,
}

fn hex_out<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(bytes))
}

fn hex_in<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
    let s = String::deserialize(d)?;
    hex::decode(s).map_err(serde::de::Error::custom)
}

pub fn sign(key: &KeyPair, signer: &str, message: &CanonicalBytes) -> Signature {
    Signature { signer: signer.to_owned(), value: sign_raw(key, message.as_bytes()).to_vec() }
}

/// Plain Ed25519 over arbitrary bytes.
pub fn sign_raw(key: &KeyPair, message: &[u8]) -> [u8; 64] {
    SigningKey::from_bytes(&key.secret).sign(message).to_bytes()
}

/// `Ok(false)` for a well-formed signature that does not verify; an error
/// only when the key or signature cannot be decoded at all.
pub fn verify(public: &[u8], message: &CanonicalBytes, sig: &Signature) -> Result<bool, CryptoError> {
    verify_raw(public, message.as_bytes(), &sig.value)
}

pub fn verify_raw(public: &[u8], message: &[u8], signature: &[u8]) -> Result<bool, CryptoError> {
    let key: [u8; 32] = public.try_into().map_err(|_| CryptoError::MalformedKey(public.len()))?;
    let key = VerifyingKey::from_bytes(&key).map_err(|_| CryptoError::MalformedKey(32))?;
    let sig = ed25519_dalek::Signature::from_slice(signature)
        .map_err(|_| CryptoError::MalformedSignature(signature.len()))?;
    Ok(key.verify_strict(message, &sig).is_ok())
}
