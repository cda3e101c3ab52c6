//! Master data records as verifiable credentials.
//!
//! Issuance binds a schema-conformant [`MasterDataRecord`] to a subject DID
//! under the issuer's signature. Disclosable attributes can be replaced by
//! salted digests so the holder later reveals only what a verifier asks for.
//! Revocation state lives in per-issuer [`StatusList`]s.

mod issue;
mod present;
mod schema;
mod status;
mod verify;

use thiserror::Error;

pub use issue::{Claims, IssueOptions, Issuer, MasterDataCredential, StatusSlot};
pub use present::{present, Disclosure, Presentation};
pub use schema::{
    validate_against_schema, AttributeKind, AttributeSpec, AttributeValue, CredentialSchema,
    MasterDataRecord, SchemaError, SchemaRegistry, Violation, ViolationReason, BUSINESS_PARTNER_V1,
};
pub use status::{
    check_status, revoke, CredentialStatus, StatusList, StatusUpdateError, STATUS_LIST_LEN,
};
pub use verify::{verify_presentation, Check, CheckOutcome, Verdict, VerificationReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CredentialError {
    #[error("record violates schema: {0:?}")]
    SchemaViolation(Vec<Violation>),
    #[error("status slot {0} already allocated")]
    StatusSlotTaken(u32),
    #[error("status list has no free slot")]
    StatusListFull,
    #[error("status slot belongs to list {0:?}, not the issuer's")]
    ForeignStatusList(String),
    #[error("cannot supersede {0}: {1}")]
    SupersedeMismatch(String, &'static str),
    #[error("key does not belong to the issuer")]
    NotIssuer,
    #[error("status index {0} out of range")]
    IndexOutOfRange(u32),
    #[error("status bitstring is malformed")]
    MalformedStatusList,
    #[error("key does not belong to the credential subject")]
    NotHolder,
    #[error("no disclosure held for attribute {0:?}")]
    UnknownAttribute(String),
}
