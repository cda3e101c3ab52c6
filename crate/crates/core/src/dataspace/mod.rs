//! Asset catalog, wire messages and participant agents.

mod agent;

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::credential::{Presentation, SchemaRegistry, StatusList};
use crate::crypto::{self, canonicalize, CanonicalBytes, Digest, Signature};
use crate::identity::{Did, Organization, Resolver};
use crate::policy::{ContractAgreement, TranscriptEntry, UsagePolicy};

pub use agent::{Agent, AuditRecord, Environment, Rejection, StepOutput, VerificationRecord, Wallet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataspaceError {
    #[error("asset {0} is already published by another provider")]
    ForeignReplacement(String),
    #[error("schema {0} is not registered")]
    UnknownSchema(String),
    #[error("self-description signature does not verify")]
    BadSignature,
}

/// A provider-signed self-description of a shareable asset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssetDescription {
    pub asset_id: String,
    pub provider: Did,
    pub schema_id: String,
    pub policy_id: Option<String>,
    /// Attributes a transfer reveals, where the credential carries them.
    pub disclosed: Vec<String>,
    pub description_digest: Digest,
    pub signature: Signature,
}

impl AssetDescription {
    pub fn new(
        provider: &Organization,
        asset_id: impl Into<String>,
        schema_id: impl Into<String>,
        policy_id: Option<String>,
        mut disclosed: Vec<String>,
    ) -> Self {
        disclosed.sort();
        disclosed.dedup();
        let mut d = Self {
            asset_id: asset_id.into(),
            provider: provider.did.clone(),
            schema_id: schema_id.into(),
            policy_id,
            disclosed,
            description_digest: crypto::sha256(b""),
            signature: Signature { signer: String::new(), value: Vec::new() },
        };
        d.description_digest = d.compute_digest();
        d.signature = provider.sign(&d.payload());
        d
    }

    fn compute_digest(&self) -> Digest {
        let body = canonicalize(&json!({
            "assetId": self.asset_id,
            "disclosed": self.disclosed,
            "policyId": self.policy_id,
            "provider": self.provider,
            "schemaId": self.schema_id,
        }))
        .expect("no floats");
        crypto::sha256(body.as_bytes())
    }

    pub fn payload(&self) -> CanonicalBytes {
        crypto::detached_payload(self, "signature").expect("no floats")
    }

    pub fn verify(&self, resolver: &Resolver) -> bool {
        self.description_digest == self.compute_digest()
            && resolver.verify_by(&self.provider, &self.payload(), &self.signature)
    }

    pub fn is_gated(&self) -> bool {
        self.policy_id.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CatalogFilter {
    #[serde(default)]
    pub schema_id: Option<String>,
    #[serde(default)]
    pub provider: Option<Did>,
}

impl CatalogFilter {
    pub fn matches(&self, d: &AssetDescription) -> bool {
        self.schema_id.as_ref().is_none_or(|s| s == &d.schema_id)
            && self.provider.as_ref().is_none_or(|p| p == &d.provider)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    entries: BTreeMap<String, AssetDescription>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, asset_id: &str) -> Option<&AssetDescription> {
        self.entries.get(asset_id)
    }

    pub fn publish(
        &mut self,
        description: AssetDescription,
        resolver: &Resolver,
        schemas: &SchemaRegistry,
    ) -> Result<(), DataspaceError> {
        if !description.verify(resolver) {
            return Err(DataspaceError::BadSignature);
        }
        if !schemas.contains(&description.schema_id) {
            return Err(DataspaceError::UnknownSchema(description.schema_id));
        }
        if let Some(existing) = self.entries.get(&description.asset_id) {
            if existing.provider != description.provider {
                return Err(DataspaceError::ForeignReplacement(description.asset_id));
            }
        }
        self.entries.insert(description.asset_id.clone(), description);
        Ok(())
    }

    /// Entries matching every field set in `filter`, by asset id.
    pub fn query(&self, filter: &CatalogFilter) -> Vec<AssetDescription> {
        self.entries.values().filter(|d| filter.matches(d)).cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    CatalogQuery,
    CatalogResponse,
    NegotiationEvent,
    PresentationTransfer,
    StatusListPublish,
    Ack,
    Nack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NackReason {
    Duplicate,
    NoAgreement,
    Malformed,
    UnknownAsset,
    IllegalTransition,
    BadSignature,
    StatusRegression,
    NotIssuer,
    NotAddressed,
    NoCatalog,
    InvalidPresentation,
}

impl NackReason {
    pub fn code(self) -> &'static str {
        match self {
            NackReason::Duplicate => "duplicate",
            NackReason::NoAgreement => "no-agreement",
            NackReason::Malformed => "malformed",
            NackReason::UnknownAsset => "unknown-asset",
            NackReason::IllegalTransition => "illegal-transition",
            NackReason::BadSignature => "bad-signature",
            NackReason::StatusRegression => "status-regression",
            NackReason::NotIssuer => "not-issuer",
            NackReason::NotAddressed => "not-addressed",
            NackReason::NoCatalog => "no-catalog",
            NackReason::InvalidPresentation => "invalid-presentation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Message {
    pub message_id: String,
    pub kind: MessageKind,
    pub sender: Did,
    pub recipient: Did,
    pub body: Value,
    pub sent_at: u64,
}

impl Message {
    pub fn new<T: Serialize>(
        message_id: String,
        kind: MessageKind,
        sender: Did,
        recipient: Did,
        body: &T,
        sent_at: u64,
    ) -> Self {
        let body = serde_json::to_value(body).expect("bodies serialize");
        Self { message_id, kind, sender, recipient, body, sent_at }
    }

    pub fn body_as<T: DeserializeOwned>(&self) -> Result<T, NackReason> {
        serde_json::from_value(self.body.clone()).map_err(|_| NackReason::Malformed)
    }

    pub fn canonical(&self) -> CanonicalBytes {
        crypto::to_canonical(self).expect("messages carry integers only")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CatalogQueryBody {
    pub filter: CatalogFilter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CatalogResponseBody {
    pub query_id: String,
    pub entries: Vec<AssetDescription>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "camelCase", rename_all_fields = "camelCase", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)]
pub enum NegotiationBody {
    Request {
        negotiation_id: String,
        asset_id: String,
    },
    Transition {
        entry: TranscriptEntry,
        policy: Option<UsagePolicy>,
        agreement: Option<ContractAgreement>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "camelCase", rename_all_fields = "camelCase", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)]
pub enum TransferBody {
    Request {
        asset_id: String,
    },
    Deliver {
        asset_id: String,
        agreement_id: Option<String>,
        presentation: Presentation,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StatusListBody {
    pub list: StatusList,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AckBody {
    pub ref_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NackBody {
    pub ref_id: String,
    pub reason: NackReason,
}
