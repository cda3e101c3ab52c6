//! Consumer-side golden records.
//!
//! Each external subject DID maps to one internal [`GoldenRecord`]. Values
//! are merged per attribute: the current value is the best valid source by
//! [`precedence`], while losing sources are kept as alternates so a later
//! revocation falls back instead of leaving a hole.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::credential::{AttributeValue, Presentation, StatusList, StatusSlot, Verdict, VerificationReport};
use crate::crypto::sha256;
use crate::identity::{Did, Resolver, TrustRegistry};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MdmError {
    #[error("refusing to ingest a presentation whose verification failed")]
    RejectedInvalid,
}

/// Issuer ranking; lower ranks are more trusted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrustTier {
    pub tiers: BTreeMap<Did, u32>,
    pub default_rank: u32,
}

impl TrustTier {
    pub fn new(default_rank: u32) -> Self {
        Self { tiers: BTreeMap::new(), default_rank }
    }

    pub fn with(mut self, issuer: Did, rank: u32) -> Self {
        self.tiers.insert(issuer, rank);
        self
    }

    pub fn rank(&self, issuer: &Did) -> u32 {
        self.tiers.get(issuer).copied().unwrap_or(self.default_rank)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributeSource {
    pub source_credential_id: String,
    pub source_issuer: Did,
    pub issued_at: u64,
}

/// Total order on sources: tier rank ascending, then issue tick descending,
/// then issuer DID ascending. `Less` means `a` wins.
pub fn precedence(a: &AttributeSource, b: &AttributeSource, tiers: &TrustTier) -> Ordering {
    tiers
        .rank(&a.source_issuer)
        .cmp(&tiers.rank(&b.source_issuer))
        .then_with(|| b.issued_at.cmp(&a.issued_at))
        .then_with(|| a.source_issuer.cmp(&b.source_issuer))
}

/// The winning source of two; `a` on a tie.
pub fn merge_precedence<'a>(a: &'a AttributeSource, b: &'a AttributeSource, tiers: &TrustTier) -> &'a AttributeSource {
    if precedence(b, a, tiers) == Ordering::Less {
        b
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InvalidReason {
    Revoked,
    Expired,
    Untrusted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidate {
    pub value: AttributeValue,
    #[serde(flatten)]
    pub source: AttributeSource,
    pub schema_id: String,
    pub status: StatusSlot,
    pub expires_at: Option<u64>,
    pub verified_at: u64,
    pub invalid: Option<InvalidReason>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoldenAttribute {
    #[serde(flatten)]
    pub current: Candidate,
    pub staleness: u64,
    pub alternates: Vec<Candidate>,
}

impl GoldenAttribute {
    pub fn value(&self) -> &AttributeValue {
        &self.current.value
    }

    pub fn is_invalid(&self) -> bool {
        self.current.invalid.is_some()
    }

    pub fn source_credential_id(&self) -> &str {
        &self.current.source.source_credential_id
    }

    fn candidates_mut(&mut self) -> impl Iterator<Item = &mut Candidate> {
        std::iter::once(&mut self.current).chain(self.alternates.iter_mut())
    }

    // Valid candidates first, each group in precedence order; credential id
    // breaks the one tie precedence leaves open. With nothing valid the head
    // is kept as a flagged value.
    fn reorder(&mut self, tiers: &TrustTier) {
        let mut all: Vec<Candidate> = std::mem::take(&mut self.alternates);
        all.push(self.current.clone());
        all.sort_by(|a, b| {
            a.invalid
                .is_some()
                .cmp(&b.invalid.is_some())
                .then_with(|| precedence(&a.source, &b.source, tiers))
                .then_with(|| a.source.source_credential_id.cmp(&b.source.source_credential_id))
        });
        self.current = all.remove(0);
        self.alternates = all;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoldenRecord {
    pub internal_id: String,
    pub subject: Did,
    pub attributes: BTreeMap<String, GoldenAttribute>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ChangeKind {
    Adopted,
    Replaced,
    Refreshed,
    Retained,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeChange {
    pub attribute: String,
    pub kind: ChangeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IngestDelta {
    pub internal_id: String,
    pub changes: Vec<AttributeChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Invalidation {
    pub internal_id: String,
    pub attribute: String,
    pub credential_id: String,
    pub reason: InvalidReason,
    /// Source that took over, if any valid alternate remained.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StalenessEntry {
    pub internal_id: String,
    pub attribute: String,
    pub staleness: u64,
}

/// What a comparison against expectations cares about: value, source and
/// whether the value is currently flagged.
pub type AttributeView = (AttributeValue, String, bool);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenStore {
    records: BTreeMap<String, GoldenRecord>,
}

pub fn internal_id_for(subject: &Did) -> String {
    format!("gr-{}", &sha256(subject.as_str().as_bytes()).as_str()[..16])
}

impl GoldenStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> impl Iterator<Item = &GoldenRecord> {
        self.records.values()
    }

    pub fn record_for(&self, subject: &Did) -> Option<&GoldenRecord> {
        self.records.get(&internal_id_for(subject))
    }

    pub fn insert_record(&mut self, record: GoldenRecord) {
        self.records.insert(record.internal_id.clone(), record);
    }

    pub fn view(&self, subject: &Did) -> BTreeMap<String, AttributeView> {
        self.record_for(subject)
            .map(|r| {
                r.attributes
                    .iter()
                    .map(|(k, a)| (k.clone(), (a.value().clone(), a.source_credential_id().to_owned(), a.is_invalid())))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Merges every attribute revealed by a successfully verified
    /// presentation.
    pub fn ingest(
        &mut self,
        report: &VerificationReport,
        presentation: &Presentation,
        tick: u64,
        tiers: &TrustTier,
    ) -> Result<IngestDelta, MdmError> {
        if report.verdict != Verdict::Valid {
            return Err(MdmError::RejectedInvalid);
        }
        let vc = &presentation.credential;
        let internal_id = internal_id_for(&vc.subject);
        let record = self.records.entry(internal_id.clone()).or_insert_with(|| GoldenRecord {
            internal_id: internal_id.clone(),
            subject: vc.subject.clone(),
            attributes: BTreeMap::new(),
        });
        let source = AttributeSource {
            source_credential_id: vc.credential_id.clone(),
            source_issuer: vc.issuer.clone(),
            issued_at: vc.issued_at,
        };
        let mut changes = Vec::new();
        for (name, value) in presentation.revealed() {
            let candidate = Candidate {
                value: value.clone(),
                source: source.clone(),
                schema_id: vc.schema_id.clone(),
                status: vc.status.clone(),
                expires_at: vc.expires_at,
                verified_at: tick,
                invalid: None,
            };
            let kind = match record.attributes.get_mut(name) {
                None => {
                    record.attributes.insert(
                        name.to_owned(),
                        GoldenAttribute { current: candidate, staleness: 0, alternates: Vec::new() },
                    );
                    ChangeKind::Adopted
                }
                Some(attr) => {
                    let before = attr.current.source.source_credential_id.clone();
                    let mut known = false;
                    for c in attr.candidates_mut() {
                        if c.source.source_credential_id == vc.credential_id {
                            c.verified_at = tick;
                            c.invalid = None;
                            known = true;
                        }
                    }
                    if !known {
                        attr.alternates.push(candidate);
                    }
                    attr.reorder(tiers);
                    attr.staleness = tick.saturating_sub(attr.current.verified_at);
                    if attr.current.source.source_credential_id != before {
                        ChangeKind::Replaced
                    } else if before == vc.credential_id {
                        ChangeKind::Refreshed
                    } else {
                        ChangeKind::Retained
                    }
                }
            };
            changes.push(AttributeChange { attribute: name.to_owned(), kind });
        }
        Ok(IngestDelta { internal_id, changes })
    }

    /// Re-checks status, expiry and issuer trust for every source. Returns
    /// the attributes whose current source became invalid.
    pub fn revalidate(
        &mut self,
        resolver: &Resolver,
        registry: &TrustRegistry,
        status_lists: &BTreeMap<String, StatusList>,
        tiers: &TrustTier,
        tick: u64,
    ) -> Vec<Invalidation> {
        let registry_ok = registry.verify(resolver);
        let mut out = Vec::new();
        for record in self.records.values_mut() {
            for (name, attr) in record.attributes.iter_mut() {
                let before = attr.current.source.source_credential_id.clone();
                let before_valid = attr.current.invalid.is_none();
                for c in attr.candidates_mut() {
                    if c.invalid.is_some() {
                        continue;
                    }
                    let revoked = status_lists.get(&c.status.list_id).is_some_and(|l| {
                        l.issuer == c.source.source_issuer && l.verify(resolver) && l.bit(c.status.index) == Ok(true)
                    });
                    c.invalid = if revoked {
                        Some(InvalidReason::Revoked)
                    } else if c.expires_at.is_some_and(|e| tick > e) {
                        Some(InvalidReason::Expired)
                    } else if registry_ok && !registry.is_trusted_issuer(&c.source.source_issuer, &c.schema_id, tick) {
                        Some(InvalidReason::Untrusted)
                    } else {
                        None
                    };
                }
                let reason = attr
                    .candidates_mut()
                    .find(|c| c.source.source_credential_id == before)
                    .and_then(|c| c.invalid);
                attr.reorder(tiers);
                attr.staleness = tick.saturating_sub(attr.current.verified_at);
                if let (true, Some(reason)) = (before_valid, reason) {
                    let fallback = (attr.current.invalid.is_none()).then(|| attr.source_credential_id().to_owned());
                    out.push(Invalidation {
                        internal_id: record.internal_id.clone(),
                        attribute: name.clone(),
                        credential_id: before,
                        reason,
                        fallback,
                    });
                }
            }
        }
        out
    }

    /// Attributes not re-verified for more than `threshold` ticks, stalest
    /// first.
    pub fn staleness_report(&self, tick: u64, threshold: u64) -> Vec<StalenessEntry> {
        let mut out: Vec<StalenessEntry> = self
            .records
            .values()
            .flat_map(|r| {
                r.attributes.iter().map(move |(name, a)| StalenessEntry {
                    internal_id: r.internal_id.clone(),
                    attribute: name.clone(),
                    staleness: tick.saturating_sub(a.current.verified_at),
                })
            })
            .filter(|e| e.staleness > threshold)
            .collect();
        out.sort_by(|a, b| {
            b.staleness
                .cmp(&a.staleness)
                .then_with(|| a.internal_id.cmp(&b.internal_id))
                .then_with(|| a.attribute.cmp(&b.attribute))
        });
        out
    }
}
