use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{evaluate_since, Decision, PolicyError, UsageContext, UsagePolicy};
use crate::crypto::{self, to_canonical, CanonicalBytes, Digest, KeyPair, Signature};
use crate::identity::{Did, Resolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NegotiationState {
    Requested,
    Offered,
    Accepted,
    Agreed,
    Finalized,
    Terminated,
}

impl NegotiationState {
    pub fn is_final(self) -> bool {
        matches!(self, NegotiationState::Finalized | NegotiationState::Terminated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Offer,
    Accept,
    Agree,
    Finalize,
    Terminate,
}

impl EventKind {
    pub const ALL: [EventKind; 5] =
        [EventKind::Offer, EventKind::Accept, EventKind::Agree, EventKind::Finalize, EventKind::Terminate];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Provider,
    Consumer,
}

/// The legal-transition table.
///
/// ```text
/// REQUESTED --offer(provider)--> OFFERED --accept(consumer)--> ACCEPTED
///   --agree(provider)--> AGREED --finalize(either)--> FINALIZED
/// any non-final state --terminate(either)--> TERMINATED
/// ```
pub fn next_state(from: NegotiationState, event: EventKind, role: Role) -> Result<NegotiationState, PolicyError> {
    use NegotiationState::*;
    let (to, allowed) = match (from, event) {
        (Requested, EventKind::Offer) => (Offered, Some(Role::Provider)),
        (Offered, EventKind::Accept) => (Accepted, Some(Role::Consumer)),
        (Accepted, EventKind::Agree) => (Agreed, Some(Role::Provider)),
        (Agreed, EventKind::Finalize) => (Finalized, None),
        (s, EventKind::Terminate) if !s.is_final() => (Terminated, None),
        _ => return Err(PolicyError::IllegalTransition { from, event }),
    };
    match allowed {
        Some(r) if r != role => Err(PolicyError::WrongActor),
        _ => Ok(to),
    }
}

/// A transition request; offers carry the policy being offered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transition {
    Offer(UsagePolicy),
    Accept,
    Agree,
    Finalize,
    Terminate,
}

impl Transition {
    pub fn kind(&self) -> EventKind {
        match self {
            Transition::Offer(_) => EventKind::Offer,
            Transition::Accept => EventKind::Accept,
            Transition::Agree => EventKind::Agree,
            Transition::Finalize => EventKind::Finalize,
            Transition::Terminate => EventKind::Terminate,
        }
    }
}

/// One signed step of a negotiation transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranscriptEntry {
    pub negotiation_id: String,
    pub seq: u32,
    pub event: EventKind,
    pub actor: Did,
    pub from: NegotiationState,
    pub to: NegotiationState,
    pub tick: u64,
    pub policy_digest: Option<Digest>,
    pub signature: Signature,
}

impl TranscriptEntry {
    pub fn payload(&self) -> CanonicalBytes {
        crypto::detached_payload(self, "signature").expect("transcript entries hold no floats")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Negotiation {
    pub negotiation_id: String,
    pub provider: Did,
    pub consumer: Did,
    pub asset_id: String,
    pub state: NegotiationState,
    pub offered_policy: Option<UsagePolicy>,
    pub transcript: Vec<TranscriptEntry>,
}

fn policy_digest(policy: &UsagePolicy) -> Digest {
    crypto::sha256(to_canonical(policy).expect("policies hold no floats").as_bytes())
}

impl Negotiation {
    pub fn request(
        negotiation_id: impl Into<String>,
        provider: Did,
        consumer: Did,
        asset_id: impl Into<String>,
    ) -> Result<Self, PolicyError> {
        if provider == consumer {
            return Err(PolicyError::SameParty);
        }
        Ok(Self {
            negotiation_id: negotiation_id.into(),
            provider,
            consumer,
            asset_id: asset_id.into(),
            state: NegotiationState::Requested,
            offered_policy: None,
            transcript: Vec::new(),
        })
    }

    pub fn role_of(&self, did: &Did) -> Option<Role> {
        if did == &self.provider {
            Some(Role::Provider)
        } else if did == &self.consumer {
            Some(Role::Consumer)
        } else {
            None
        }
    }

    /// Fires `transition` as the holder of `actor_key`, returning the
    /// successor negotiation with a signed transcript entry appended.
    pub fn transition(&self, transition: Transition, actor_key: &KeyPair, tick: u64) -> Result<Negotiation, PolicyError> {
        let actor = Did::from_public_key(actor_key.public());
        let event = transition.kind();
        // State legality first, so an out-of-order event reads as illegal
        // regardless of who sent it.
        let legal = [Role::Provider, Role::Consumer]
            .into_iter()
            .any(|r| next_state(self.state, event, r).is_ok());
        if !legal {
            return Err(PolicyError::IllegalTransition { from: self.state, event });
        }
        let role = self.role_of(&actor).ok_or(PolicyError::WrongActor)?;
        let to = next_state(self.state, event, role)?;
        let policy = match &transition {
            Transition::Offer(p) => {
                p.validate()?;
                if p.assigner != self.provider {
                    return Err(PolicyError::TranscriptMismatch("policy assigner is not the provider"));
                }
                Some(p.clone())
            }
            _ => None,
        };
        let mut entry = TranscriptEntry {
            negotiation_id: self.negotiation_id.clone(),
            seq: self.transcript.len() as u32,
            event,
            actor: actor.clone(),
            from: self.state,
            to,
            tick,
            policy_digest: policy.as_ref().map(policy_digest),
            signature: Signature { signer: String::new(), value: Vec::new() },
        };
        entry.signature = crypto::sign(actor_key, &actor.method_id(1), &entry.payload());
        let mut next = self.clone();
        if let Some(p) = policy {
            next.offered_policy = Some(p);
        }
        next.state = to;
        next.transcript.push(entry);
        Ok(next)
    }

    /// Applies a transition signed by the counterparty. `policy` must be the
    /// offered policy when the entry is an offer.
    pub fn apply(
        &self,
        entry: &TranscriptEntry,
        policy: Option<&UsagePolicy>,
        resolver: &Resolver,
    ) -> Result<Negotiation, PolicyError> {
        if entry.negotiation_id != self.negotiation_id {
            return Err(PolicyError::TranscriptMismatch("negotiation id"));
        }
        if entry.seq as usize != self.transcript.len() {
            return Err(PolicyError::TranscriptMismatch("sequence number"));
        }
        if entry.from != self.state {
            return Err(PolicyError::IllegalTransition { from: self.state, event: entry.event });
        }
        let role = self.role_of(&entry.actor).ok_or(PolicyError::WrongActor)?;
        if next_state(self.state, entry.event, role)? != entry.to {
            return Err(PolicyError::TranscriptMismatch("target state"));
        }
        if !resolver.verify_by(&entry.actor, &entry.payload(), &entry.signature) {
            return Err(PolicyError::BadSignature);
        }
        let mut next = self.clone();
        if entry.event == EventKind::Offer {
            let p = policy.ok_or(PolicyError::TranscriptMismatch("offer without policy"))?;
            p.validate()?;
            if Some(policy_digest(p)) != entry.policy_digest || p.assigner != self.provider {
                return Err(PolicyError::TranscriptMismatch("offered policy"));
            }
            next.offered_policy = Some(p.clone());
        }
        next.state = entry.to;
        next.transcript.push(entry.clone());
        Ok(next)
    }

    /// Replays the transcript from REQUESTED checking every signature,
    /// actor and table row.
    pub fn verify_transcript(&self, resolver: &Resolver) -> bool {
        let mut state = NegotiationState::Requested;
        for (i, entry) in self.transcript.iter().enumerate() {
            let ok = entry.seq as usize == i
                && entry.negotiation_id == self.negotiation_id
                && entry.from == state
                && self
                    .role_of(&entry.actor)
                    .and_then(|role| next_state(state, entry.event, role).ok())
                    == Some(entry.to)
                && resolver.verify_by(&entry.actor, &entry.payload(), &entry.signature);
            if !ok {
                return false;
            }
            state = entry.to;
        }
        state == self.state
    }

    /// True iff the transcript walked the full happy path into FINALIZED.
    pub fn passed_through_agreement(&self) -> bool {
        let path: Vec<NegotiationState> = self.transcript.iter().map(|e| e.to).collect();
        path == [
            NegotiationState::Offered,
            NegotiationState::Accepted,
            NegotiationState::Agreed,
            NegotiationState::Finalized,
        ]
    }
}

/// The doubly signed outcome of a negotiation. Transfers of policy-gated
/// assets are authorized only through one of these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContractAgreement {
    pub agreement_id: String,
    pub negotiation_id: String,
    pub asset_id: String,
    pub policy: UsagePolicy,
    pub provider: Did,
    pub consumer: Did,
    pub agreed_at: u64,
    pub provider_signature: Option<Signature>,
    pub consumer_signature: Option<Signature>,
}

impl ContractAgreement {
    /// Unsigned agreement for a negotiation in AGREED.
    pub fn draft(neg: &Negotiation, tick: u64) -> Result<Self, PolicyError> {
        if neg.state != NegotiationState::Agreed {
            return Err(PolicyError::WrongState(neg.state));
        }
        let policy = neg.offered_policy.clone().ok_or(PolicyError::WrongState(neg.state))?;
        let id = crypto::sha256(neg.negotiation_id.as_bytes());
        Ok(Self {
            agreement_id: format!("agr-{}", &id.as_str()[..24]),
            negotiation_id: neg.negotiation_id.clone(),
            asset_id: neg.asset_id.clone(),
            policy,
            provider: neg.provider.clone(),
            consumer: neg.consumer.clone(),
            agreed_at: tick,
            provider_signature: None,
            consumer_signature: None,
        })
    }

    pub fn payload(&self) -> CanonicalBytes {
        let mut v = serde_json::to_value(self).expect("serializable");
        if let Some(m) = v.as_object_mut() {
            m.remove("providerSignature");
            m.remove("consumerSignature");
        }
        crypto::canonicalize(&v).expect("agreements hold no floats")
    }

    pub fn sign_as(&mut self, key: &KeyPair) -> Result<(), PolicyError> {
        let did = Did::from_public_key(key.public());
        let sig = crypto::sign(key, &did.method_id(1), &self.payload());
        if did == self.provider {
            self.provider_signature = Some(sig);
        } else if did == self.consumer {
            self.consumer_signature = Some(sig);
        } else {
            return Err(PolicyError::WrongActor);
        }
        Ok(())
    }

    pub fn verify_provider(&self, resolver: &Resolver) -> bool {
        self.provider_signature
            .as_ref()
            .is_some_and(|s| resolver.verify_by(&self.provider, &self.payload(), s))
    }

    pub fn verify_consumer(&self, resolver: &Resolver) -> bool {
        self.consumer_signature
            .as_ref()
            .is_some_and(|s| resolver.verify_by(&self.consumer, &self.payload(), s))
    }

    pub fn verify(&self, resolver: &Resolver) -> bool {
        self.verify_provider(resolver) && self.verify_consumer(resolver)
    }

    /// True iff this agreement is the one `neg` produced.
    pub fn matches(&self, neg: &Negotiation) -> bool {
        self.negotiation_id == neg.negotiation_id
            && self.asset_id == neg.asset_id
            && self.provider == neg.provider
            && self.consumer == neg.consumer
            && Some(&self.policy) == neg.offered_policy.as_ref()
    }
}

/// Drafts and countersigns in one step when both keys are at hand.
pub fn conclude_agreement(
    neg: &Negotiation,
    provider_key: &KeyPair,
    consumer_key: &KeyPair,
    tick: u64,
) -> Result<ContractAgreement, PolicyError> {
    let mut agreement = ContractAgreement::draft(neg, tick)?;
    if Did::from_public_key(provider_key.public()) != neg.provider
        || Did::from_public_key(consumer_key.public()) != neg.consumer
    {
        return Err(PolicyError::WrongActor);
    }
    agreement.sign_as(provider_key)?;
    agreement.sign_as(consumer_key)?;
    Ok(agreement)
}

/// Per-agreement use counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseLedger {
    counts: BTreeMap<String, u64>,
}

impl UseLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, agreement_id: &str) -> u64 {
        self.counts.get(agreement_id).copied().unwrap_or(0)
    }
}

/// Evaluates the agreed policy with the ledger's use count and elapsed time
/// measured from the agreement tick; a Permit consumes one use.
pub fn authorize_use(agreement: &ContractAgreement, ctx: &UsageContext, ledger: &mut UseLedger) -> Decision {
    let ctx = UsageContext { prior_use_count: ledger.count(&agreement.agreement_id), ..ctx.clone() };
    let decision = evaluate_since(&agreement.policy, &ctx, agreement.agreed_at);
    if decision == Decision::Permit {
        *ledger.counts.entry(agreement.agreement_id.clone()).or_insert(0) += 1;
    }
    decision
}
