//! Global-knowledge expectation of every consumer's golden records.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::run::CredentialFact;
use crate::credential::AttributeValue;
use crate::dataspace::AssetDescription;
use crate::identity::{Did, TrustRegistry};
use crate::mdm::{AttributeView, TrustTier};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "state")]
pub enum Expected {
    Live { value: AttributeValue, credential_id: String },
    /// No live source remains; the store may hold the value flagged or not
    /// at all.
    Flagged,
}

pub type ExpectedRecord = BTreeMap<String, Expected>;

/// A consumer granted transfers of a provider's asset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subscription {
    pub consumer: String,
    pub provider: String,
    pub asset: AssetDescription,
    pub tiers: TrustTier,
}

/// For each (consumer, provider) pair, the attribute-level merge of every
/// credential the provider holds under the subscribed assets, judged
/// against the final revocation, expiry and trust state.
pub fn convergence_oracle(
    facts: &BTreeMap<String, CredentialFact>,
    revoked: &BTreeSet<String>,
    registry: &TrustRegistry,
    subscriptions: &[Subscription],
    tick: u64,
) -> BTreeMap<(String, String), ExpectedRecord> {
    type Key<'a> = (u32, Reverse<u64>, &'a Did, &'a str);
    type Candidates<'a> = BTreeMap<String, Vec<(Key<'a>, bool, AttributeValue)>>;
    let mut out: BTreeMap<(String, String), Candidates<'_>> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String, String, String)> = BTreeSet::new();
    for sub in subscriptions {
        let pair = (sub.consumer.clone(), sub.provider.clone());
        let slot = out.entry(pair).or_default();
        for fact in facts.values() {
            let vc = &fact.credential;
            if fact.holder != sub.provider || vc.schema_id != sub.asset.schema_id {
                continue;
            }
            let live = !revoked.contains(&vc.credential_id)
                && vc.expires_at.is_none_or(|e| tick <= e)
                && registry.is_trusted_issuer(&vc.issuer, &vc.schema_id, tick);
            let key: Key<'_> = (sub.tiers.rank(&vc.issuer), Reverse(vc.issued_at), &vc.issuer, &vc.credential_id);
            let visible = vc.claims.attributes.iter().map(|(k, v)| (k.clone(), v.clone())).chain(
                fact.disclosures
                    .iter()
                    .filter(|d| sub.asset.disclosed.contains(&d.name))
                    .map(|d| (d.name.clone(), d.value.clone())),
            );
            for (name, value) in visible {
                let id = (sub.consumer.clone(), sub.provider.clone(), name.clone(), vc.credential_id.clone());
                if seen.insert(id) {
                    slot.entry(name).or_default().push((key, live, value));
                }
            }
        }
    }
    out.into_iter()
        .map(|(pair, attrs)| {
            let rec = attrs
                .into_iter()
                .map(|(name, mut cands)| {
                    cands.sort_by(|a, b| a.0.cmp(&b.0));
                    let e = match cands.into_iter().find(|c| c.1) {
                        Some((key, _, value)) => Expected::Live { value, credential_id: key.3.to_owned() },
                        None => Expected::Flagged,
                    };
                    (name, e)
                })
                .collect();
            (pair, rec)
        })
        .collect()
}

pub fn view_matches(expected: &ExpectedRecord, view: &BTreeMap<String, AttributeView>) -> bool {
    let unexpected = view.keys().any(|k| !expected.contains_key(k));
    !unexpected
        && expected.iter().all(|(name, e)| match (e, view.get(name)) {
            (Expected::Live { value, credential_id }, Some((v, id, flagged))) => v == value && id == credential_id && !flagged,
            (Expected::Live { .. }, None) => false,
            (Expected::Flagged, None) => true,
            (Expected::Flagged, Some((_, _, flagged))) => *flagged,
        })
}
