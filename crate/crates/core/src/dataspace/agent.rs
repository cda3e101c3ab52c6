//! A participant agent: one organization's wallet, issuer state, negotiation
//! table and golden-record store, advanced one inbox at a time.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    AckBody, AssetDescription, Catalog, CatalogFilter, CatalogQueryBody, CatalogResponseBody, Message, MessageKind,
    NackBody, NackReason, NegotiationBody, StatusListBody, TransferBody,
};
use crate::audit::{AuditEvent, EventType};
use crate::credential::{
    present, verify_presentation, CredentialError, CredentialSchema, Disclosure, IssueOptions, Issuer,
    MasterDataCredential, MasterDataRecord, Presentation, SchemaRegistry, StatusList, StatusUpdateError, Verdict,
    VerificationReport,
};
use crate::identity::{Did, Organization, Resolver, TrustRegistry};
use crate::mdm::{GoldenStore, Invalidation, TrustTier};
use crate::policy::{
    authorize_use, Action, ContractAgreement, Decision, EventKind, Negotiation, NegotiationState, PolicyError, Role,
    Transition, UsageContext, UsagePolicy, UseLedger,
};

/// Shared, read-only dataspace services.
#[derive(Debug, Clone, Copy)]
pub struct Environment<'a> {
    pub resolver: &'a Resolver,
    pub registry: &'a TrustRegistry,
    pub schemas: &'a SchemaRegistry,
    pub catalog: &'a Catalog,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wallet {
    pub credentials: BTreeMap<String, MasterDataCredential>,
    pub disclosures: BTreeMap<String, Vec<Disclosure>>,
}

/// An audit event plus the private payload its digest commits to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub event: AuditEvent,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationRecord {
    pub verifier: Did,
    pub credential_id: String,
    pub message_id: Option<String>,
    pub tick: u64,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rejection {
    pub message_id: String,
    pub sender: Did,
    pub reason: NackReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepOutput {
    pub outbox: Vec<Message>,
    pub audit: Vec<AuditRecord>,
    pub verifications: Vec<VerificationRecord>,
    pub rejections: Vec<Rejection>,
    pub invalidations: Vec<Invalidation>,
    pub denied_transfers: u32,
}

type Handled = (EventType, Value);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    org: Organization,
    issuer: Option<Issuer>,
    hosts_catalog: bool,
    wallet: Wallet,
    policies: BTreeMap<String, UsagePolicy>,
    own_assets: BTreeMap<String, AssetDescription>,
    status_cache: BTreeMap<String, StatusList>,
    status_history: Vec<StatusList>,
    known_assets: BTreeMap<String, AssetDescription>,
    pending_discovery: BTreeSet<String>,
    negotiations: BTreeMap<String, Negotiation>,
    drafts: BTreeMap<String, ContractAgreement>,
    agreements: BTreeMap<String, ContractAgreement>,
    received: BTreeMap<String, Presentation>,
    golden: GoldenStore,
    tiers: TrustTier,
    uses: UseLedger,
    subscribers: BTreeMap<String, BTreeSet<Did>>,
    pushed: BTreeSet<(Did, String)>,
    seen: BTreeSet<String>,
    next_seq: u64,
}

impl Agent {
    pub fn new(org: Organization, tiers: TrustTier, is_issuer: bool, hosts_catalog: bool, tick: u64) -> Self {
        let issuer = is_issuer.then(|| Issuer::new(org.clone(), tick));
        let mut status_cache = BTreeMap::new();
        let mut status_history = Vec::new();
        if let Some(i) = &issuer {
            let l = i.status_list().clone();
            status_history.push(l.clone());
            status_cache.insert(l.list_id.clone(), l);
        }
        Self {
            org,
            issuer,
            hosts_catalog,
            wallet: Wallet::default(),
            policies: BTreeMap::new(),
            own_assets: BTreeMap::new(),
            status_cache,
            status_history,
            known_assets: BTreeMap::new(),
            pending_discovery: BTreeSet::new(),
            negotiations: BTreeMap::new(),
            drafts: BTreeMap::new(),
            agreements: BTreeMap::new(),
            received: BTreeMap::new(),
            golden: GoldenStore::new(),
            tiers,
            uses: UseLedger::new(),
            subscribers: BTreeMap::new(),
            pushed: BTreeSet::new(),
            seen: BTreeSet::new(),
            next_seq: 0,
        }
    }

    pub fn did(&self) -> &Did {
        &self.org.did
    }

    pub fn organization(&self) -> &Organization {
        &self.org
    }

    pub fn issuer(&self) -> Option<&Issuer> {
        self.issuer.as_ref()
    }

    pub fn wallet(&self) -> &Wallet {
        &self.wallet
    }

    pub fn golden(&self) -> &GoldenStore {
        &self.golden
    }

    pub fn tiers(&self) -> &TrustTier {
        &self.tiers
    }

    pub fn status_cache(&self) -> &BTreeMap<String, StatusList> {
        &self.status_cache
    }

    /// Every status list this agent accepted, in order of acceptance.
    pub fn status_history(&self) -> &[StatusList] {
        &self.status_history
    }

    pub fn negotiations(&self) -> &BTreeMap<String, Negotiation> {
        &self.negotiations
    }

    pub fn agreements(&self) -> &BTreeMap<String, ContractAgreement> {
        &self.agreements
    }

    /// Latest valid presentation received per credential id.
    pub fn received(&self) -> &BTreeMap<String, Presentation> {
        &self.received
    }

    pub fn own_assets(&self) -> &BTreeMap<String, AssetDescription> {
        &self.own_assets
    }

    pub fn policies(&self) -> &BTreeMap<String, UsagePolicy> {
        &self.policies
    }

    pub fn known_assets(&self) -> &BTreeMap<String, AssetDescription> {
        &self.known_assets
    }

    /// Consumers granted a transfer, per own asset.
    pub fn subscribers(&self) -> &BTreeMap<String, BTreeSet<Did>> {
        &self.subscribers
    }

    fn short(&self) -> &str {
        &self.org.did.short()[..8]
    }

    fn message<T: Serialize>(&mut self, kind: MessageKind, to: &Did, body: &T, tick: u64) -> Message {
        let id = format!("m-{}-{}", self.short(), self.next_seq);
        self.next_seq += 1;
        Message::new(id, kind, self.org.did.clone(), to.clone(), body, tick)
    }

    fn record(&self, out: &mut StepOutput, event_type: EventType, counterparty: Option<Did>, payload: Value, tick: u64) {
        let event = AuditEvent::over(event_type, self.org.did.clone(), counterparty, &payload, tick);
        out.audit.push(AuditRecord { event, payload });
    }

    /// Builds the audit event for a lifecycle action this agent performed.
    pub fn audit_record(&self, event_type: EventType, counterparty: Option<Did>, payload: Value, tick: u64) -> AuditRecord {
        let event = AuditEvent::over(event_type, self.org.did.clone(), counterparty, &payload, tick);
        AuditRecord { event, payload }
    }

    // Lifecycle actions driven from outside the message protocol.

    pub fn issue_credential(
        &mut self,
        subject: &Did,
        record: &MasterDataRecord,
        schema: &CredentialSchema,
        tick: u64,
        options: IssueOptions,
    ) -> Result<(MasterDataCredential, Vec<Disclosure>), CredentialError> {
        let issuer = self.issuer.as_mut().ok_or(CredentialError::NotIssuer)?;
        issuer.issue(subject, record, schema, tick, options)
    }

    pub fn accept_credential(&mut self, credential: MasterDataCredential, disclosures: Vec<Disclosure>) {
        self.wallet.disclosures.insert(credential.credential_id.clone(), disclosures);
        self.wallet.credentials.insert(credential.credential_id.clone(), credential);
    }

    pub fn revoke_credential(&mut self, index: u32, tick: u64) -> Result<StatusList, CredentialError> {
        let issuer = self.issuer.as_mut().ok_or(CredentialError::NotIssuer)?;
        let list = issuer.revoke(index, tick)?.clone();
        self.status_history.push(list.clone());
        self.status_cache.insert(list.list_id.clone(), list.clone());
        Ok(list)
    }

    /// Current own status list addressed to each recipient.
    pub fn status_messages(&mut self, recipients: &[Did], tick: u64) -> Vec<Message> {
        let Some(list) = self.issuer.as_ref().map(|i| i.status_list().clone()) else {
            return Vec::new();
        };
        let body = StatusListBody { list };
        let me = self.org.did.clone();
        recipients
            .iter()
            .filter(|r| **r != me)
            .map(|r| self.message(MessageKind::StatusListPublish, r, &body, tick))
            .collect()
    }

    pub fn publish_asset(
        &mut self,
        asset_id: &str,
        schema_id: &str,
        policy: Option<UsagePolicy>,
        disclosed: Vec<String>,
    ) -> AssetDescription {
        let policy_id = policy.as_ref().map(|p| p.policy_id.clone());
        if let Some(p) = policy {
            self.policies.insert(p.policy_id.clone(), p);
        }
        let d = AssetDescription::new(&self.org, asset_id, schema_id, policy_id, disclosed);
        self.own_assets.insert(asset_id.to_owned(), d.clone());
        self.known_assets.insert(asset_id.to_owned(), d.clone());
        d
    }

    /// Opens a negotiation for `asset_id`, discovering it through the
    /// catalog host first if it is not yet known.
    pub fn start_negotiation(&mut self, asset_id: &str, catalog_host: &Did, tick: u64) -> Vec<Message> {
        let mut out = Vec::new();
        if self.known_assets.contains_key(asset_id) {
            out.extend(self.negotiation_request(asset_id, tick));
        } else {
            self.pending_discovery.insert(asset_id.to_owned());
            let body = CatalogQueryBody { filter: CatalogFilter::default() };
            out.push(self.message(MessageKind::CatalogQuery, catalog_host, &body, tick));
        }
        out
    }

    fn negotiation_request(&mut self, asset_id: &str, tick: u64) -> Option<Message> {
        let provider = self.known_assets.get(asset_id)?.provider.clone();
        let id = format!("neg-{}-{}", self.short(), self.negotiations.len());
        let neg = Negotiation::request(id.clone(), provider.clone(), self.org.did.clone(), asset_id).ok()?;
        self.negotiations.insert(id.clone(), neg);
        let body = NegotiationBody::Request { negotiation_id: id, asset_id: asset_id.to_owned() };
        Some(self.message(MessageKind::NegotiationEvent, &provider, &body, tick))
    }

    pub fn request_transfer(&mut self, asset_id: &str, catalog: &Catalog, tick: u64) -> Option<Message> {
        let provider = self
            .known_assets
            .get(asset_id)
            .or_else(|| catalog.get(asset_id))?
            .provider
            .clone();
        let body = TransferBody::Request { asset_id: asset_id.to_owned() };
        Some(self.message(MessageKind::PresentationTransfer, &provider, &body, tick))
    }

    /// Decides one use of a received asset under its agreement.
    pub fn use_asset(&mut self, asset_id: &str, action: Action, purpose: &str, region: &str, tick: u64) -> (Decision, Option<String>) {
        let me = self.org.did.clone();
        let agreement = self
            .agreements
            .values()
            .find(|a| a.asset_id == asset_id && a.consumer == me)
            .cloned();
        match agreement {
            Some(a) => {
                let ctx = UsageContext {
                    action,
                    purpose: purpose.to_owned(),
                    tick,
                    region: region.to_owned(),
                    prior_use_count: 0,
                };
                (authorize_use(&a, &ctx, &mut self.uses), Some(a.agreement_id))
            }
            None => {
                let ungated = self.known_assets.get(asset_id).is_some_and(|d| !d.is_gated());
                (if ungated { Decision::Permit } else { Decision::Deny }, None)
            }
        }
    }

    /// Re-verifies the stored presentation of `credential_id` with the
    /// current local view, refreshing the golden record when it passes.
    pub fn reverify(&mut self, credential_id: &str, env: Environment<'_>, tick: u64) -> Option<VerificationRecord> {
        let p = self.received.get(credential_id)?.clone();
        let report = verify_presentation(&p, env.resolver, env.registry, &self.status_cache, env.schemas, tick);
        if report.verdict == Verdict::Valid {
            self.golden.ingest(&report, &p, tick, &self.tiers).expect("report is valid");
        }
        Some(VerificationRecord {
            verifier: self.org.did.clone(),
            credential_id: credential_id.to_owned(),
            message_id: None,
            tick,
            report,
        })
    }

    pub fn revalidate(&mut self, env: Environment<'_>, tick: u64) -> Vec<Invalidation> {
        self.golden.revalidate(env.resolver, env.registry, &self.status_cache, &self.tiers, tick)
    }

    // Message protocol.

    /// Handles `inbox` in order, then pushes any new credentials to
    /// consumers already granted a transfer.
    pub fn step(&mut self, inbox: &[Message], tick: u64, env: Environment<'_>) -> StepOutput {
        let mut out = StepOutput::default();
        for m in inbox {
            let (event_type, payload) = if m.recipient != self.org.did {
                self.nack(m, NackReason::NotAddressed, tick, &mut out)
            } else if self.seen.contains(&m.message_id) {
                self.nack(m, NackReason::Duplicate, tick, &mut out)
            } else {
                self.seen.insert(m.message_id.clone());
                self.handle(m, tick, env, &mut out)
            };
            let payload = json!({ "messageId": m.message_id, "kind": m.kind, "outcome": payload });
            self.record(&mut out, event_type, Some(m.sender.clone()), payload, tick);
        }
        self.push_updates(tick, env, &mut out);
        out
    }

    fn nack(&mut self, m: &Message, reason: NackReason, tick: u64, out: &mut StepOutput) -> Handled {
        out.rejections.push(Rejection { message_id: m.message_id.clone(), sender: m.sender.clone(), reason });
        if !matches!(m.kind, MessageKind::Ack | MessageKind::Nack) {
            let body = NackBody { ref_id: m.message_id.clone(), reason };
            let reply = if reason == NackReason::Duplicate {
                let id = format!("dup-{}-{}", self.short(), m.message_id);
                Message::new(id, MessageKind::Nack, self.org.did.clone(), m.sender.clone(), &body, tick)
            } else {
                self.message(MessageKind::Nack, &m.sender, &body, tick)
            };
            out.outbox.push(reply);
        }
        (EventType::MessageHandled, json!({ "nack": reason.code() }))
    }

    fn ack(&mut self, m: &Message, tick: u64, out: &mut StepOutput) {
        let body = AckBody { ref_id: m.message_id.clone() };
        let reply = self.message(MessageKind::Ack, &m.sender, &body, tick);
        out.outbox.push(reply);
    }

    fn handle(&mut self, m: &Message, tick: u64, env: Environment<'_>, out: &mut StepOutput) -> Handled {
        let result = match m.kind {
            MessageKind::CatalogQuery => self.on_catalog_query(m, tick, env, out),
            MessageKind::CatalogResponse => self.on_catalog_response(m, tick, env, out),
            MessageKind::NegotiationEvent => self.on_negotiation(m, tick, env, out),
            MessageKind::PresentationTransfer => self.on_transfer(m, tick, env, out),
            MessageKind::StatusListPublish => self.on_status_list(m, tick, env, out),
            MessageKind::Ack => m.body_as::<AckBody>().map(|b| (EventType::MessageHandled, json!({ "ack": b.ref_id }))),
            MessageKind::Nack => m
                .body_as::<NackBody>()
                .map(|b| (EventType::MessageHandled, json!({ "nacked": b.ref_id, "reason": b.reason.code() }))),
        };
        result.unwrap_or_else(|reason| self.nack(m, reason, tick, out))
    }

    fn on_catalog_query(&mut self, m: &Message, tick: u64, env: Environment<'_>, out: &mut StepOutput) -> Result<Handled, NackReason> {
        if !self.hosts_catalog {
            return Err(NackReason::NoCatalog);
        }
        let body: CatalogQueryBody = m.body_as()?;
        let entries = env.catalog.query(&body.filter);
        let n = entries.len();
        let reply = CatalogResponseBody { query_id: m.message_id.clone(), entries };
        let msg = self.message(MessageKind::CatalogResponse, &m.sender, &reply, tick);
        out.outbox.push(msg);
        Ok((EventType::MessageHandled, json!({ "answered": n })))
    }

    fn on_catalog_response(&mut self, m: &Message, tick: u64, env: Environment<'_>, out: &mut StepOutput) -> Result<Handled, NackReason> {
        let body: CatalogResponseBody = m.body_as()?;
        let mut learned = 0;
        for d in body.entries {
            if d.verify(env.resolver) {
                self.known_assets.insert(d.asset_id.clone(), d);
                learned += 1;
            }
        }
        let ready: Vec<String> = self
            .pending_discovery
            .iter()
            .filter(|a| self.known_assets.contains_key(*a))
            .cloned()
            .collect();
        for a in &ready {
            self.pending_discovery.remove(a);
            if let Some(msg) = self.negotiation_request(a, tick) {
                out.outbox.push(msg);
            }
        }
        Ok((EventType::MessageHandled, json!({ "learned": learned, "requested": ready })))
    }

    fn on_negotiation(&mut self, m: &Message, tick: u64, env: Environment<'_>, out: &mut StepOutput) -> Result<Handled, NackReason> {
        match m.body_as::<NegotiationBody>()? {
            NegotiationBody::Request { negotiation_id, asset_id } => {
                let asset = self.own_assets.get(&asset_id).ok_or(NackReason::UnknownAsset)?;
                let policy = asset
                    .policy_id
                    .as_ref()
                    .and_then(|id| self.policies.get(id))
                    .cloned()
                    .ok_or(NackReason::Malformed)?;
                if self.negotiations.contains_key(&negotiation_id) {
                    return Err(NackReason::IllegalTransition);
                }
                let neg = Negotiation::request(negotiation_id.clone(), self.org.did.clone(), m.sender.clone(), asset_id)
                    .map_err(|_| NackReason::Malformed)?;
                let neg = neg
                    .transition(Transition::Offer(policy.clone()), &self.org.keys, tick)
                    .map_err(|_| NackReason::IllegalTransition)?;
                let entry = neg.transcript.last().cloned().expect("just appended");
                self.negotiations.insert(negotiation_id.clone(), neg);
                let body = NegotiationBody::Transition { entry, policy: Some(policy), agreement: None };
                let msg = self.message(MessageKind::NegotiationEvent, &m.sender, &body, tick);
                out.outbox.push(msg);
                Ok((EventType::NegotiationTransition, json!({ "negotiationId": negotiation_id, "to": NegotiationState::Offered })))
            }
            NegotiationBody::Transition { entry, policy, agreement } => {
                let neg = self.negotiations.get(&entry.negotiation_id).ok_or(NackReason::IllegalTransition)?;
                if entry.actor != m.sender {
                    return Err(NackReason::IllegalTransition);
                }
                let next = neg.apply(&entry, policy.as_ref(), env.resolver).map_err(|e| match e {
                    PolicyError::BadSignature => NackReason::BadSignature,
                    _ => NackReason::IllegalTransition,
                })?;
                let role = next.role_of(&self.org.did).ok_or(NackReason::NotAddressed)?;
                self.on_transition(next, entry.event, role, agreement, tick, env, out)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn on_transition(
        &mut self,
        neg: Negotiation,
        event: EventKind,
        role: Role,
        agreement: Option<ContractAgreement>,
        tick: u64,
        env: Environment<'_>,
        out: &mut StepOutput,
    ) -> Result<Handled, NackReason> {
        let id = neg.negotiation_id.clone();
        let counterparty = match role {
            Role::Provider => neg.consumer.clone(),
            Role::Consumer => neg.provider.clone(),
        };
        let mut event_type = EventType::NegotiationTransition;
        let (next, body) = match (event, role) {
            (EventKind::Offer, Role::Consumer) => {
                let expected = self.known_assets.get(&neg.asset_id).and_then(|d| d.policy_id.clone());
                let offered = neg.offered_policy.as_ref().map(|p| p.policy_id.clone());
                let t = if expected.is_some() && expected == offered { Transition::Accept } else { Transition::Terminate };
                let next = neg.transition(t, &self.org.keys, tick).map_err(|_| NackReason::IllegalTransition)?;
                (next, None)
            }
            (EventKind::Accept, Role::Provider) => {
                let next = neg.transition(Transition::Agree, &self.org.keys, tick).map_err(|_| NackReason::IllegalTransition)?;
                let mut draft = ContractAgreement::draft(&next, tick).map_err(|_| NackReason::IllegalTransition)?;
                draft.sign_as(&self.org.keys).map_err(|_| NackReason::IllegalTransition)?;
                self.drafts.insert(id.clone(), draft.clone());
                (next, Some(draft))
            }
            (EventKind::Agree, Role::Consumer) => {
                let mut a = agreement.ok_or(NackReason::Malformed)?;
                if !a.matches(&neg) || !a.verify_provider(env.resolver) {
                    return Err(NackReason::BadSignature);
                }
                a.sign_as(&self.org.keys).map_err(|_| NackReason::IllegalTransition)?;
                let next = neg.transition(Transition::Finalize, &self.org.keys, tick).map_err(|_| NackReason::IllegalTransition)?;
                self.agreements.insert(a.agreement_id.clone(), a.clone());
                event_type = EventType::AgreementConcluded;
                (next, Some(a))
            }
            (EventKind::Finalize, Role::Provider) => {
                let a = agreement.ok_or(NackReason::Malformed)?;
                let draft = self.drafts.get(&id).ok_or(NackReason::IllegalTransition)?;
                if a.payload() != draft.payload() || !a.matches(&neg) || !a.verify(env.resolver) {
                    return Err(NackReason::BadSignature);
                }
                self.drafts.remove(&id);
                self.agreements.insert(a.agreement_id.clone(), a);
                let state = neg.state;
                self.negotiations.insert(id.clone(), neg);
                return Ok((EventType::AgreementConcluded, json!({ "negotiationId": id, "to": state })));
            }
            _ => {
                let state = neg.state;
                self.negotiations.insert(id.clone(), neg);
                return Ok((event_type, json!({ "negotiationId": id, "to": state })));
            }
        };
        let entry = next.transcript.last().cloned().expect("just appended");
        let state = next.state;
        self.negotiations.insert(id.clone(), next);
        let body = NegotiationBody::Transition { entry, policy: None, agreement: body };
        let msg = self.message(MessageKind::NegotiationEvent, &counterparty, &body, tick);
        out.outbox.push(msg);
        Ok((event_type, json!({ "negotiationId": id, "to": state })))
    }

    /// The finalized agreement authorizing `consumer` to receive `asset`.
    fn agreement_for(&self, asset: &AssetDescription, consumer: &Did, env: Environment<'_>) -> Option<String> {
        self.agreements
            .values()
            .find(|a| {
                a.asset_id == asset.asset_id
                    && &a.consumer == consumer
                    && a.verify(env.resolver)
                    && self
                        .negotiations
                        .get(&a.negotiation_id)
                        .is_some_and(|n| n.state == NegotiationState::Finalized && n.passed_through_agreement())
            })
            .map(|a| a.agreement_id.clone())
    }

    fn believes_live(&self, vc: &MasterDataCredential, tick: u64) -> bool {
        !vc.is_expired(tick)
            && self
                .status_cache
                .get(&vc.status.list_id)
                .is_none_or(|l| l.bit(vc.status.index) != Ok(true))
    }

    /// Sends a presentation of every live own credential under the asset's
    /// schema. Without `force`, credentials already sent to `consumer` are
    /// skipped.
    fn deliver(
        &mut self,
        asset: &AssetDescription,
        consumer: &Did,
        agreement_id: Option<String>,
        force: bool,
        tick: u64,
        out: &mut StepOutput,
    ) -> Vec<String> {
        let creds: Vec<MasterDataCredential> = self
            .wallet
            .credentials
            .values()
            .filter(|vc| vc.schema_id == asset.schema_id && vc.subject == self.org.did && self.believes_live(vc, tick))
            .filter(|vc| force || !self.pushed.contains(&(consumer.clone(), vc.credential_id.clone())))
            .cloned()
            .collect();
        let mut sent = Vec::new();
        for vc in creds {
            let ds = self.wallet.disclosures.get(&vc.credential_id).cloned().unwrap_or_default();
            let names: Vec<&str> = asset
                .disclosed
                .iter()
                .map(String::as_str)
                .filter(|n| ds.iter().any(|d| d.name == *n && vc.claims.digests.contains(&d.digest())))
                .collect();
            let Ok(presentation) = present(&self.org.keys, &vc, &ds, &names, tick) else {
                continue;
            };
            let body = TransferBody::Deliver {
                asset_id: asset.asset_id.clone(),
                agreement_id: agreement_id.clone(),
                presentation,
            };
            let msg = self.message(MessageKind::PresentationTransfer, consumer, &body, tick);
            out.outbox.push(msg);
            self.pushed.insert((consumer.clone(), vc.credential_id.clone()));
            sent.push(vc.credential_id.clone());
        }
        sent
    }

    fn on_transfer(&mut self, m: &Message, tick: u64, env: Environment<'_>, out: &mut StepOutput) -> Result<Handled, NackReason> {
        match m.body_as::<TransferBody>()? {
            TransferBody::Request { asset_id } => {
                let asset = self.own_assets.get(&asset_id).cloned().ok_or(NackReason::UnknownAsset)?;
                let agreement_id = self.agreement_for(&asset, &m.sender, env);
                if asset.is_gated() && agreement_id.is_none() {
                    out.denied_transfers += 1;
                    self.nack(m, NackReason::NoAgreement, tick, out);
                    return Ok((EventType::TransferRequested, json!({ "assetId": asset_id, "denied": NackReason::NoAgreement.code() })));
                }
                self.subscribers.entry(asset_id.clone()).or_default().insert(m.sender.clone());
                let sent = self.deliver(&asset, &m.sender, agreement_id, true, tick, out);
                Ok((EventType::Presented, json!({ "assetId": asset_id, "credentials": sent })))
            }
            TransferBody::Deliver { asset_id, agreement_id, presentation } => {
                if presentation.holder != m.sender {
                    return Err(NackReason::Malformed);
                }
                let report =
                    verify_presentation(&presentation, env.resolver, env.registry, &self.status_cache, env.schemas, tick);
                let credential_id = presentation.credential.credential_id.clone();
                let verdict = report.verdict;
                let failed: Vec<&str> = report.failed_checks().into_iter().map(|c| c.name()).collect();
                let payload = json!({
                    "assetId": asset_id,
                    "agreementId": agreement_id,
                    "credentialId": credential_id,
                    "verdict": verdict,
                    "failed": failed,
                });
                out.verifications.push(VerificationRecord {
                    verifier: self.org.did.clone(),
                    credential_id: credential_id.clone(),
                    message_id: Some(m.message_id.clone()),
                    tick,
                    report: report.clone(),
                });
                if verdict == Verdict::Valid {
                    self.golden.ingest(&report, &presentation, tick, &self.tiers).expect("report is valid");
                    self.received.insert(credential_id, presentation);
                    self.ack(m, tick, out);
                } else {
                    self.nack(m, NackReason::InvalidPresentation, tick, out);
                }
                Ok((EventType::Verified, payload))
            }
        }
    }

    fn on_status_list(&mut self, m: &Message, tick: u64, env: Environment<'_>, out: &mut StepOutput) -> Result<Handled, NackReason> {
        let StatusListBody { list } = m.body_as()?;
        let current = self.status_cache.get(&list.list_id);
        if let Some(cur) = current {
            cur.accepts_successor(&list).map_err(|e| match e {
                StatusUpdateError::Regression(_) | StatusUpdateError::Outdated => NackReason::StatusRegression,
                StatusUpdateError::WrongList => NackReason::NotIssuer,
                StatusUpdateError::Malformed => NackReason::Malformed,
            })?;
        }
        if list.issuer != m.sender {
            return Err(NackReason::NotIssuer);
        }
        if !list.verify(env.resolver) {
            return Err(NackReason::BadSignature);
        }
        let changed = current != Some(&list);
        let mut invalidated = 0;
        if changed {
            self.status_history.push(list.clone());
            self.status_cache.insert(list.list_id.clone(), list.clone());
            let inv = self.golden.revalidate(env.resolver, env.registry, &self.status_cache, &self.tiers, tick);
            invalidated = inv.len();
            out.invalidations.extend(inv);
        }
        self.ack(m, tick, out);
        Ok((
            EventType::MessageHandled,
            json!({ "listId": list.list_id, "updatedAt": list.updated_at, "changed": changed, "invalidated": invalidated }),
        ))
    }

    fn push_updates(&mut self, tick: u64, env: Environment<'_>, out: &mut StepOutput) {
        let targets: Vec<(String, Did)> = self
            .subscribers
            .iter()
            .flat_map(|(a, cs)| cs.iter().map(move |c| (a.clone(), c.clone())))
            .collect();
        for (asset_id, consumer) in targets {
            let Some(asset) = self.own_assets.get(&asset_id).cloned() else {
                continue;
            };
            let agreement_id = self.agreement_for(&asset, &consumer, env);
            if asset.is_gated() && agreement_id.is_none() {
                continue;
            }
            let sent = self.deliver(&asset, &consumer, agreement_id, false, tick, out);
            if !sent.is_empty() {
                let payload = json!({ "assetId": asset_id, "credentials": sent, "push": true });
                self.record(out, EventType::Presented, Some(consumer), payload, tick);
            }
        }
    }
}
