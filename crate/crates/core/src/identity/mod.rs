//! Organization identifiers (`did:mdm`), their documents, a local resolver
//! and the governance-operated trust registry.

mod registry;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::{self, sha256_raw, CanonicalBytes, Digest, KeyPair, Signature};

pub use registry::{TrustEntry, TrustRegistry};

pub const DID_PREFIX: &str = "did:mdm:";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("malformed DID {0:?}")]
    MalformedDid(String),
    #[error("DID {0} is not registered")]
    NotFound(Did),
    #[error("DID {0} already exists")]
    DidCollision(Did),
    #[error("key does not belong to the registry operator")]
    NotOperator,
    #[error("overlapping trust entry for {issuer} / {schema_id}")]
    OverlappingEntry { issuer: Did, schema_id: String },
}

/// `did:mdm:<32 hex>`, where the hex payload is the first 16 bytes of the
/// SHA-256 of the organization's initial public key.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Did(String);

impl Did {
    pub fn parse(s: &str) -> Result<Self, IdentityError> {
        let payload = s
            .strip_prefix(DID_PREFIX)
            .ok_or_else(|| IdentityError::MalformedDid(s.to_owned()))?;
        let ok = payload.len() == 32 && payload.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if ok {
            Ok(Self(s.to_owned()))
        } else {
            Err(IdentityError::MalformedDid(s.to_owned()))
        }
    }

    pub fn from_public_key(public: &[u8; 32]) -> Self {
        let h = sha256_raw(public);
        Self(format!("{DID_PREFIX}{}", hex::encode(&h[..16])))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The 32-hex suffix, handy for file names and message ids.
    pub fn short(&self) -> &str {
        &self.0[DID_PREFIX.len()..]
    }

    pub fn method_id(&self, n: u32) -> String {
        format!("{}#key-{n}", self.0)
    }
}

impl TryFrom<String> for Did {
    type Error = IdentityError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Did::parse(&value)
    }
}

impl From<Did> for String {
    fn from(d: Did) -> Self {
        d.0
    }
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Did({})", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationMethod {
    pub method_id: String,
    pub public_key_hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DidDocument {
    pub id: Did,
    pub verification_methods: Vec<VerificationMethod>,
    pub created: u64,
}

impl DidDocument {
    pub fn digest(&self) -> Digest {
        crypto::sha256(self.canonical().as_bytes())
    }

    pub fn canonical(&self) -> CanonicalBytes {
        crypto::to_canonical(self).expect("documents hold no floats")
    }

    /// Checks the structural invariants: at least one method, all methods
    /// scoped under `id`.
    pub fn is_well_formed(&self) -> bool {
        let scope = format!("{}#", self.id);
        !self.verification_methods.is_empty()
            && self.verification_methods.iter().all(|m| m.method_id.starts_with(&scope))
    }

    pub fn key(&self, method_id: &str) -> Option<[u8; 32]> {
        let m = self.verification_methods.iter().find(|m| m.method_id == method_id)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&m.public_key_hex, &mut out).ok()?;
        Some(out)
    }
}

/// A sovereign participant: identifier, document and signing keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Organization {
    pub did: Did,
    pub document: DidDocument,
    pub keys: KeyPair,
}

impl Organization {
    pub fn method_id(&self) -> String {
        self.did.method_id(1)
    }

    pub fn sign(&self, message: &CanonicalBytes) -> Signature {
        crypto::sign(&self.keys, &self.method_id(), message)
    }
}

/// Local stand-in for a verifiable data registry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolver {
    store: BTreeMap<Did, DidDocument>,
}

impl Resolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, doc: DidDocument) -> Result<&DidDocument, IdentityError> {
        if self.store.contains_key(&doc.id) {
            return Err(IdentityError::DidCollision(doc.id));
        }
        let id = doc.id.clone();
        Ok(self.store.entry(id).or_insert(doc))
    }

    pub fn resolve(&self, did: &str) -> Result<&DidDocument, IdentityError> {
        let did = Did::parse(did)?;
        self.store.get(&did).ok_or(IdentityError::NotFound(did))
    }

    pub fn documents(&self) -> impl Iterator<Item = &DidDocument> {
        self.store.values()
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    /// The key behind a `<did>#key-n` method reference.
    pub fn verification_key(&self, method_id: &str) -> Option<[u8; 32]> {
        let (did, _) = method_id.split_once('#')?;
        self.resolve(did).ok()?.key(method_id)
    }

    /// True iff `sig` was made by a verification method of `expected` over
    /// `message`.
    pub fn verify_by(&self, expected: &Did, message: &CanonicalBytes, sig: &Signature) -> bool {
        let scoped = sig
            .signer
            .split_once('#')
            .is_some_and(|(did, _)| did == expected.as_str());
        if !scoped {
            return false;
        }
        match self.verification_key(&sig.signer) {
            Some(key) => crypto::verify(&key, message, sig).unwrap_or(false),
            None => false,
        }
    }
}

/// Derives an organization from `seed` and registers its document.
pub fn create_organization(
    resolver: &mut Resolver,
    seed: [u8; 32],
    tick: u64,
) -> Result<Organization, IdentityError> {
    let keys = KeyPair::from_seed(seed);
    let did = Did::from_public_key(keys.public());
    let document = DidDocument {
        id: did.clone(),
        verification_methods: vec![VerificationMethod {
            method_id: did.method_id(1),
            public_key_hex: keys.public_hex(),
        }],
        created: tick,
    };
    resolver.register(document.clone())?;
    Ok(Organization { did, document, keys })
}
