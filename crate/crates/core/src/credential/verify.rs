use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Presentation, SchemaRegistry, StatusList, STATUS_LIST_LEN};
use crate::identity::{Resolver, TrustRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Check {
    Signature,
    IssuerTrusted,
    NotRevoked,
    NotExpired,
    SchemaConformant,
    DisclosuresConsistent,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Signature,
        Check::IssuerTrusted,
        Check::NotRevoked,
        Check::NotExpired,
        Check::SchemaConformant,
        Check::DisclosuresConsistent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Signature => "signature",
            Check::IssuerTrusted => "issuerTrusted",
            Check::NotRevoked => "notRevoked",
            Check::NotExpired => "notExpired",
            Check::SchemaConformant => "schemaConformant",
            Check::DisclosuresConsistent => "disclosuresConsistent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckOutcome {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub checks: BTreeMap<Check, CheckOutcome>,
    pub verified_at: u64,
}

impl VerificationReport {
    pub fn passed(&self, check: Check) -> bool {
        self.checks.get(&check) == Some(&CheckOutcome::Pass)
    }

    pub fn failed_checks(&self) -> Vec<Check> {
        Check::ALL.into_iter().filter(|c| !self.passed(*c)).collect()
    }

    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }
}

/// Runs all six checks on `presentation` using only the resolver, the trust
/// registry and the supplied status lists. Never fails: every problem is a
/// failed check in the report.
pub fn verify_presentation(
    presentation: &Presentation,
    resolver: &Resolver,
    registry: &TrustRegistry,
    status_lists: &BTreeMap<String, StatusList>,
    schemas: &SchemaRegistry,
    tick: u64,
) -> VerificationReport {
    let vc = &presentation.credential;
    let mut checks = BTreeMap::new();
    let mut record = |check, ok: bool| {
        checks.insert(check, if ok { CheckOutcome::Pass } else { CheckOutcome::Fail });
    };

    record(Check::Signature, vc.verify_signature(resolver) && presentation.verify_holder(resolver));

    record(
        Check::IssuerTrusted,
        registry.verify(resolver) && registry.is_trusted_issuer(&vc.issuer, &vc.schema_id, tick),
    );

    let not_revoked = status_lists.get(&vc.status.list_id).is_some_and(|list| {
        list.issuer == vc.issuer
            && vc.status.index < STATUS_LIST_LEN
            && list.verify(resolver)
            && list.bit(vc.status.index) == Ok(false)
    });
    record(Check::NotRevoked, not_revoked);

    record(Check::NotExpired, !vc.is_expired(tick));

    let conformant = schemas.get(&vc.schema_id).is_some_and(|schema| {
        let plain_ok = vc.claims.attributes.iter().all(|(name, value)| {
            schema.attribute(name).is_some_and(|spec| spec.kind == value.kind())
        });
        let disclosed_ok = presentation.disclosed.iter().all(|d| {
            schema.attribute(&d.name).is_some_and(|spec| spec.disclosable && spec.kind == d.value.kind())
        });
        let hidden_required_ok = schema
            .attributes
            .iter()
            .filter(|a| a.required && !a.disclosable)
            .all(|a| vc.claims.attributes.contains_key(&a.name));
        let bounded = vc.claims.attributes.len() + vc.claims.digests.len() <= schema.attributes.len();
        plain_ok && disclosed_ok && hidden_required_ok && bounded
    });
    record(Check::SchemaConformant, conformant);

    let mut names = BTreeSet::new();
    let consistent = presentation.disclosed.iter().all(|d| {
        d.salt_well_formed()
            && names.insert(d.name.as_str())
            && !vc.claims.attributes.contains_key(&d.name)
            && vc.claims.digests.contains(&d.digest())
    });
    record(Check::DisclosuresConsistent, consistent);

    let verdict = if checks.values().all(|c| *c == CheckOutcome::Pass) {
        Verdict::Valid
    } else {
        Verdict::Invalid
    };
    VerificationReport { verdict, checks, verified_at: tick }
}
