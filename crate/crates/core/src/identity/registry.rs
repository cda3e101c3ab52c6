use serde::{Deserialize, Serialize};

use super::{Did, IdentityError, Organization, Resolver};
use crate::crypto::{self, detached_payload, CanonicalBytes, KeyPair, Signature};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrustEntry {
    pub issuer: Did,
    pub schema_id: String,
    pub valid_from: u64,
    pub valid_until: Option<u64>,
}

impl TrustEntry {
    pub fn covers(&self, tick: u64) -> bool {
        self.valid_from <= tick && self.valid_until.is_none_or(|until| tick <= until)
    }

    fn overlaps(&self, other: &TrustEntry) -> bool {
        let a_end = self.valid_until.unwrap_or(u64::MAX);
        let b_end = other.valid_until.unwrap_or(u64::MAX);
        self.valid_from <= b_end && other.valid_from <= a_end
    }
}

/// Signed list of which issuers are trusted for which schemas, and when.
///
/// Values are never mutated in place: [`TrustRegistry::amend`] returns a new
/// registry and leaves the receiver untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrustRegistry {
    pub entries: Vec<TrustEntry>,
    pub registry_operator: Did,
    pub signature: Signature,
}

impl TrustRegistry {
    pub fn new(operator: &Organization) -> Self {
        let mut reg = TrustRegistry {
            entries: Vec::new(),
            registry_operator: operator.did.clone(),
            signature: Signature { signer: String::new(), value: Vec::new() },
        };
        reg.signature = crypto::sign(&operator.keys, &operator.method_id(), &reg.payload());
        reg
    }

    pub fn payload(&self) -> CanonicalBytes {
        detached_payload(self, "signature").expect("registry holds no floats")
    }

    pub fn verify(&self, resolver: &Resolver) -> bool {
        resolver.verify_by(&self.registry_operator, &self.payload(), &self.signature)
    }

    pub fn is_trusted_issuer(&self, issuer: &Did, schema_id: &str, tick: u64) -> bool {
        self.entries
            .iter()
            .any(|e| &e.issuer == issuer && e.schema_id == schema_id && e.covers(tick))
    }

    pub fn amend(&self, entry: TrustEntry, operator_key: &KeyPair) -> Result<TrustRegistry, IdentityError> {
        if Did::from_public_key(operator_key.public()) != self.registry_operator {
            return Err(IdentityError::NotOperator);
        }
        let clash = self.entries.iter().any(|e| {
            e.issuer == entry.issuer && e.schema_id == entry.schema_id && e.overlaps(&entry)
        });
        if clash {
            return Err(IdentityError::OverlappingEntry {
                issuer: entry.issuer,
                schema_id: entry.schema_id,
            });
        }
        let mut next = self.clone();
        next.entries.push(entry);
        next.signature = crypto::sign(operator_key, &self.registry_operator.method_id(1), &next.payload());
        Ok(next)
    }
}
