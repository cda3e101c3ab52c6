use serde::{Deserialize, Serialize};

use super::CredentialError;
use crate::crypto::{self, detached_payload, CanonicalBytes, KeyPair, Signature};
use crate::identity::{Did, Organization, Resolver};

/// Number of entries in every status list.
pub const STATUS_LIST_LEN: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CredentialStatus {
    Valid,
    Revoked,
}

/// Signed revocation bitstring. Bit `i` lives in byte `i / 8` at position
/// `i % 8`, least-significant bit first; 1 means revoked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatusList {
    pub list_id: String,
    pub issuer: Did,
    pub bits: String,
    pub updated_at: u64,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatusUpdateError {
    #[error("update is for a different list or issuer")]
    WrongList,
    #[error("update clears revoked bit {0}")]
    Regression(u32),
    #[error("update is older than the held list")]
    Outdated,
    #[error("malformed bitstring")]
    Malformed,
}

impl StatusList {
    pub fn new(issuer: &Organization, list_id: impl Into<String>, tick: u64) -> Self {
        let mut list = StatusList {
            list_id: list_id.into(),
            issuer: issuer.did.clone(),
            bits: "0".repeat(STATUS_LIST_LEN as usize / 4),
            updated_at: tick,
            signature: Signature { signer: String::new(), value: Vec::new() },
        };
        list.signature = crypto::sign(&issuer.keys, &issuer.method_id(), &list.payload());
        list
    }

    pub fn payload(&self) -> CanonicalBytes {
        detached_payload(self, "signature").expect("status lists hold no floats")
    }

    pub fn verify(&self, resolver: &Resolver) -> bool {
        self.decode().is_some() && resolver.verify_by(&self.issuer, &self.payload(), &self.signature)
    }

    pub(crate) fn decode(&self) -> Option<Vec<u8>> {
        let bytes = hex::decode(&self.bits).ok()?;
        (bytes.len() * 8 == STATUS_LIST_LEN as usize).then_some(bytes)
    }

    pub fn bit(&self, index: u32) -> Result<bool, CredentialError> {
        if index >= STATUS_LIST_LEN {
            return Err(CredentialError::IndexOutOfRange(index));
        }
        let bytes = self.decode().ok_or(CredentialError::MalformedStatusList)?;
        Ok(bytes[(index / 8) as usize] >> (index % 8) & 1 == 1)
    }

    pub fn popcount(&self) -> u32 {
        self.decode().map_or(0, |b| b.iter().map(|x| x.count_ones()).sum())
    }

    pub fn revoked_indices(&self) -> Vec<u32> {
        (0..STATUS_LIST_LEN).filter(|&i| self.bit(i).unwrap_or(false)).collect()
    }

    /// Checks that `next` may replace `self` in a verifier's cache: same list,
    /// not older, and no revoked bit cleared. Signature checks are separate.
    pub fn accepts_successor(&self, next: &StatusList) -> Result<(), StatusUpdateError> {
        if self.list_id != next.list_id || self.issuer != next.issuer {
            return Err(StatusUpdateError::WrongList);
        }
        let old = self.decode().ok_or(StatusUpdateError::Malformed)?;
        let new = next.decode().ok_or(StatusUpdateError::Malformed)?;
        for (i, (o, n)) in old.iter().zip(&new).enumerate() {
            let cleared = o & !n;
            if cleared != 0 {
                return Err(StatusUpdateError::Regression(i as u32 * 8 + cleared.trailing_zeros()));
            }
        }
        if next.updated_at < self.updated_at {
            return Err(StatusUpdateError::Outdated);
        }
        Ok(())
    }
}

/// Sets bit `index`, re-signs, and returns the new list. Only the list's
/// issuer may revoke.
pub fn revoke(
    issuer_key: &KeyPair,
    list: &StatusList,
    index: u32,
    tick: u64,
) -> Result<StatusList, CredentialError> {
    if Did::from_public_key(issuer_key.public()) != list.issuer {
        return Err(CredentialError::NotIssuer);
    }
    if index >= STATUS_LIST_LEN {
        return Err(CredentialError::IndexOutOfRange(index));
    }
    let mut bytes = list.decode().ok_or(CredentialError::MalformedStatusList)?;
    bytes[(index / 8) as usize] |= 1 << (index % 8);
    let mut next = list.clone();
    next.bits = hex::encode(bytes);
    next.updated_at = tick;
    next.signature = crypto::sign(issuer_key, &list.issuer.method_id(1), &next.payload());
    Ok(next)
}

pub fn check_status(list: &StatusList, index: u32) -> Result<CredentialStatus, CredentialError> {
    Ok(if list.bit(index)? { CredentialStatus::Revoked } else { CredentialStatus::Valid })
}
