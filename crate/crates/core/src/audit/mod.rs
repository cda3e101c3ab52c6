//! Content-blind audit trail.
//!
//! Each [`AuditEvent`] records who did what to whom and when, plus the digest
//! of a payload that only the actor keeps. Events are leaves of an
//! append-only Merkle tree so any party holding an old root can check that
//! history was only ever extended.

mod merkle;

use serde::{Deserialize, Serialize};

use crate::crypto::{self, to_canonical, Digest};
use crate::identity::Did;

pub use merkle::{
    leaf_hash, node_hash, subtree_root, verify_consistency, verify_inclusion, AuditTree,
    ConsistencyProof, Hash, InclusionProof,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuditError {
    #[error("leaf index {index} out of range for tree of size {size}")]
    IndexOutOfRange { index: u64, size: u64 },
    #[error("size {old} out of range for tree of size {size}")]
    SizeOutOfRange { old: u64, size: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventType {
    Issued,
    Presented,
    Verified,
    Revoked,
    Superseded,
    NegotiationTransition,
    AgreementConcluded,
    UseAuthorized,
    /// Hook for arbitration outside cryptographic accountability; carries no
    /// semantics of its own.
    DisputeRaised,
    Onboarded,
    GovernanceUpdated,
    AssetPublished,
    TransferRequested,
    MessageHandled,
    StatusPublished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditEvent {
    pub event_type: EventType,
    pub actor: Did,
    pub counterparty: Option<Did>,
    pub content_digest: Digest,
    pub tick: u64,
}

impl AuditEvent {
    /// Builds an event whose digest commits to `payload` without exposing it.
    pub fn over<T: Serialize>(
        event_type: EventType,
        actor: Did,
        counterparty: Option<Did>,
        payload: &T,
        tick: u64,
    ) -> Self {
        let bytes = to_canonical(payload).expect("audit payloads hold no floats");
        Self { event_type, actor, counterparty, content_digest: crypto::sha256(bytes.as_bytes()), tick }
    }

    pub fn leaf_data(&self) -> Vec<u8> {
        to_canonical(self).expect("events hold no floats").into_bytes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub size: u64,
    pub root: Digest,
}

/// Events plus the tree over them. The log text is one canonical event per
/// line; the tree can always be rebuilt from it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditLog {
    events: Vec<AuditEvent>,
    tree: AuditTree,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, event: AuditEvent) -> u64 {
        let index = self.tree.push(&event.leaf_data());
        self.events.push(event);
        index
    }

    /// Value-style append: returns the extended log and leaves `self` as is.
    pub fn appended(&self, event: AuditEvent) -> (AuditLog, u64) {
        let mut next = self.clone();
        let index = next.append(event);
        (next, index)
    }

    pub fn events(&self) -> &[AuditEvent] {
        &self.events
    }

    pub fn tree(&self) -> &AuditTree {
        &self.tree
    }

    pub fn size(&self) -> u64 {
        self.tree.size()
    }

    pub fn root(&self) -> Digest {
        self.tree.root()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { size: self.size(), root: self.root() }
    }

    /// Replaces the event at `index` and its leaf. Exists to model a
    /// dishonest log operator; consistency proofs against earlier
    /// checkpoints expose it.
    pub fn rewrite(&mut self, index: u64, event: AuditEvent) -> Result<(), AuditError> {
        if index >= self.size() {
            return Err(AuditError::IndexOutOfRange { index, size: self.size() });
        }
        self.events[index as usize] = event;
        self.tree = AuditTree::from_leaf_hashes(self.events.iter().map(|e| leaf_hash(&e.leaf_data())));
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.events
            .iter()
            .map(|e| format!("{}\n", to_canonical(e).expect("events hold no floats")))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<AuditLog, AuditError> {
        let mut log = AuditLog::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| AuditError::Parse { line: i + 1, message };
            let value = crypto::parse(line.as_bytes()).map_err(|e| parse_err(e.to_string()))?;
            let event: AuditEvent = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
            log.append(event);
        }
        Ok(log)
    }
}

pub fn checkpoints_to_text(checkpoints: &[Checkpoint]) -> String {
    checkpoints
        .iter()
        .map(|c| format!("{}\n", to_canonical(c).expect("checkpoints hold no floats")))
        .collect()
}

pub fn checkpoints_from_text(text: &str) -> Result<Vec<Checkpoint>, AuditError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            crypto::parse(line.as_bytes())
                .map_err(|e| e.to_string())
                .and_then(|v| serde_json::from_value(v).map_err(|e| e.to_string()))
                .map_err(|message| AuditError::Parse { line: i + 1, message })
        })
        .collect()
}
