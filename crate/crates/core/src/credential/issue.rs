use std::collections::{BTreeMap, BTreeSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    revoke, validate_against_schema, AttributeValue, CredentialError, CredentialSchema,
    Disclosure, MasterDataRecord, StatusList, STATUS_LIST_LEN,
};
use crate::crypto::{self, detached_payload, CanonicalBytes, Digest, Signature};
use crate::identity::{Did, Organization, Resolver};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatusSlot {
    pub list_id: String,
    pub index: u32,
}

/// Attributes visible to everyone plus digests standing in for the
/// selectively disclosable ones. Without selective disclosure `digests` is
/// empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub attributes: BTreeMap<String, AttributeValue>,
    pub digests: Vec<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MasterDataCredential {
    pub credential_id: String,
    pub issuer: Did,
    pub subject: Did,
    pub schema_id: String,
    pub record_id: String,
    pub issued_at: u64,
    pub expires_at: Option<u64>,
    pub version: u32,
    pub supersedes: Option<String>,
    pub claims: Claims,
    pub status: StatusSlot,
    pub signature: Signature,
}

impl MasterDataCredential {
    /// Bytes covered by the issuer signature.
    pub fn payload(&self) -> CanonicalBytes {
        detached_payload(self, "signature").expect("credentials hold no floats")
    }

    pub fn verify_signature(&self, resolver: &Resolver) -> bool {
        resolver.verify_by(&self.issuer, &self.payload(), &self.signature)
    }

    pub fn is_expired(&self, tick: u64) -> bool {
        self.expires_at.is_some_and(|e| tick > e)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IssueOptions {
    pub expires_at: Option<u64>,
    pub supersedes: Option<String>,
    pub selective_disclosure: bool,
    pub rng_seed: u64,
    /// Explicit slot in the issuer's list; next free slot when `None`.
    pub status_index: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct IssuedRef {
    subject: Did,
    record_id: String,
    version: u32,
}

/// Issuer-side state: signing identity, its single status list and the
/// slot allocation table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issuer {
    org: Organization,
    status_list: StatusList,
    allocated: BTreeSet<u32>,
    issued: BTreeMap<String, IssuedRef>,
}

impl Issuer {
    pub fn new(org: Organization, tick: u64) -> Self {
        let list_id = format!("sl-{}", org.did.short());
        let status_list = StatusList::new(&org, list_id, tick);
        Self { org, status_list, allocated: BTreeSet::new(), issued: BTreeMap::new() }
    }

    pub fn did(&self) -> &Did {
        &self.org.did
    }

    pub fn organization(&self) -> &Organization {
        &self.org
    }

    pub fn status_list(&self) -> &StatusList {
        &self.status_list
    }

    pub fn next_free_slot(&self) -> Option<u32> {
        (0..STATUS_LIST_LEN).find(|i| !self.allocated.contains(i))
    }

    /// Issues a credential for `record` to `subject`. Returns the credential
    /// and, when selective disclosure is on, the disclosures the holder must
    /// keep in its wallet.
    pub fn issue(
        &mut self,
        subject: &Did,
        record: &MasterDataRecord,
        schema: &CredentialSchema,
        tick: u64,
        options: IssueOptions,
    ) -> Result<(MasterDataCredential, Vec<Disclosure>), CredentialError> {
        let violations = validate_against_schema(record, schema);
        if !violations.is_empty() {
            return Err(CredentialError::SchemaViolation(violations));
        }
        let index = match options.status_index {
            Some(i) if i >= STATUS_LIST_LEN => return Err(CredentialError::IndexOutOfRange(i)),
            Some(i) if self.allocated.contains(&i) => return Err(CredentialError::StatusSlotTaken(i)),
            Some(i) => i,
            None => self.next_free_slot().ok_or(CredentialError::StatusListFull)?,
        };
        let version = match &options.supersedes {
            None => 1,
            Some(prev) => {
                let prev_ref = self
                    .issued
                    .get(prev)
                    .ok_or(CredentialError::SupersedeMismatch(prev.clone(), "unknown credential"))?;
                if &prev_ref.subject != subject || prev_ref.record_id != record.record_id {
                    return Err(CredentialError::SupersedeMismatch(prev.clone(), "different subject or record"));
                }
                prev_ref.version + 1
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(options.rng_seed);
        let mut claims = Claims::default();
        let mut disclosures = Vec::new();
        for (name, value) in &record.attributes {
            let disclosable = schema.attribute(name).is_some_and(|a| a.disclosable);
            if options.selective_disclosure && disclosable {
                let mut salt = [0u8; 16];
                rng.fill_bytes(&mut salt);
                let d = Disclosure { salt: hex::encode(salt), name: name.clone(), value: value.clone() };
                claims.digests.push(d.digest());
                disclosures.push(d);
            } else {
                claims.attributes.insert(name.clone(), value.clone());
            }
        }
        claims.digests.sort();

        let mut credential = MasterDataCredential {
            credential_id: String::new(),
            issuer: self.org.did.clone(),
            subject: subject.clone(),
            schema_id: schema.schema_id.clone(),
            record_id: record.record_id.clone(),
            issued_at: tick,
            expires_at: options.expires_at,
            version,
            supersedes: options.supersedes,
            claims,
            status: StatusSlot { list_id: self.status_list.list_id.clone(), index },
            signature: Signature { signer: String::new(), value: Vec::new() },
        };
        let id_digest = crypto::sha256(credential.payload().as_bytes());
        credential.credential_id = format!("vc-{}", &id_digest.as_str()[..24]);
        credential.signature = self.org.sign(&credential.payload());

        self.allocated.insert(index);
        self.issued.insert(
            credential.credential_id.clone(),
            IssuedRef { subject: subject.clone(), record_id: record.record_id.clone(), version },
        );
        Ok((credential, disclosures))
    }

    /// Revokes the slot of a credential this issuer allocated.
    pub fn revoke(&mut self, index: u32, tick: u64) -> Result<&StatusList, CredentialError> {
        self.status_list = revoke(&self.org.keys, &self.status_list, index, tick)?;
        Ok(&self.status_list)
    }

    pub fn has_issued(&self, credential_id: &str) -> bool {
        self.issued.contains_key(credential_id)
    }
}
