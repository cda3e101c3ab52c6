//! The tick loop.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::oracle::{convergence_oracle, view_matches, ExpectedRecord, Subscription};
use super::scenario::{Directive, RoleHint, Scenario, TamperTarget};
use crate::audit::{verify_consistency, AuditEvent, AuditLog, Checkpoint};
use crate::credential::{
    Check, CredentialError, Disclosure, IssueOptions, MasterDataCredential, MasterDataRecord, SchemaError,
    SchemaRegistry, Verdict,
};
use crate::crypto::{sha256, sha256_raw, Digest};
use crate::dataspace::{
    Agent, AuditRecord, Catalog, DataspaceError, Environment, Message, MessageKind, NackReason, StatusListBody,
    StepOutput, VerificationRecord,
};
use crate::identity::{create_organization, Did, IdentityError, Organization, Resolver, TrustEntry, TrustRegistry};
use crate::mdm::{AttributeView, GoldenRecord, TrustTier};
use crate::policy::{Decision, UsagePolicy};

const MAX_ROUNDS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DirectiveError {
    #[error("no such target: {0}")]
    NoSuchTarget(String),
    #[error("organization {0:?} has not been created")]
    NotCreated(String),
    #[error("organization {0:?} already exists")]
    AlreadyCreated(String),
    #[error("scenario declares no operator")]
    NoOperator,
    #[error("unknown reference {0:?}")]
    UnknownReference(String),
    #[error("reference {0:?} is already taken")]
    DuplicateReference(String),
    #[error("{0:?} did not issue this credential")]
    NotIssuer(String),
    #[error(transparent)]
    Credential(#[from] CredentialError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Dataspace(#[from] DataspaceError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("message exchange did not settle within {MAX_ROUNDS} rounds")]
    Livelock,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("tick {tick}, {} ({directive}): {cause}", index.map_or_else(|| "message delivery".to_owned(), |i| format!("schedule entry {i}")))]
    DirectiveFailure { tick: u64, index: Option<usize>, directive: &'static str, cause: DirectiveError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TraceEvent {
    Sent,
    Dropped,
    Delivered,
    Undeliverable,
    Injected,
    Tampered,
}

/// One line of `trace.msgs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceRecord {
    pub seq: u64,
    pub tick: u64,
    pub event: TraceEvent,
    pub message: Message,
}

/// Everything the run knows about a credential, independent of who has
/// received it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CredentialFact {
    pub reference: String,
    pub issuer: String,
    pub holder: String,
    pub credential: MasterDataCredential,
    pub disclosures: Vec<Disclosure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationSummary {
    pub verifier: String,
    pub credential_id: String,
    pub message_id: Option<String>,
    pub tick: u64,
    pub verdict: Verdict,
    pub failed: Vec<String>,
    /// Passed although the issuer had already revoked the credential.
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UseRecord {
    pub consumer: String,
    pub asset_id: String,
    pub tick: u64,
    pub decision: Decision,
    pub agreement_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TamperOutcome {
    pub target: TamperTarget,
    pub tick: u64,
    pub check: String,
    pub detected: bool,
    /// Tampered message ids, or the rewritten leaf index.
    pub subjects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceEntry {
    pub consumer: String,
    pub subject: String,
    pub converged: bool,
    pub convergence_tick: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Metrics {
    pub message_count: u64,
    pub delivered_count: u64,
    pub dropped_count: u64,
    pub audit_root: Digest,
    pub audit_size: u64,
    pub checkpoints_consistent: bool,
    pub verification_count: u64,
    pub stale_verification_count: u64,
    pub denied_transfers: u64,
    pub last_lifecycle_tick: Option<u64>,
    pub convergence: Vec<ConvergenceEntry>,
    pub all_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OrgSummary {
    pub label: String,
    pub did: Did,
    pub roles: Vec<RoleHint>,
}

/// Contents of `report.run`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub ticks: u64,
    pub organizations: Vec<OrgSummary>,
    pub metrics: Metrics,
    pub tamper: Vec<TamperOutcome>,
    pub verifications: Vec<VerificationSummary>,
    pub uses: Vec<UseRecord>,
    pub golden: BTreeMap<String, Vec<GoldenRecord>>,
}

/// A finished run: the report plus every artifact needed to persist or
/// cross-check it.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenario: Scenario,
    pub report: RunReport,
    pub trace: Vec<TraceRecord>,
    pub audit: AuditLog,
    /// Private payload behind each audit leaf, by leaf index.
    pub audit_payloads: Vec<Value>,
    pub checkpoints: Vec<Checkpoint>,
    /// Leaf index of each schedule entry's audit record.
    pub directive_leaves: Vec<Option<u64>>,
    pub dids: BTreeMap<String, Did>,
    pub agents: BTreeMap<String, Agent>,
    pub resolver: Resolver,
    pub registry: TrustRegistry,
    pub schemas: SchemaRegistry,
    pub catalog: Catalog,
    pub facts: BTreeMap<String, CredentialFact>,
    /// Tick at which each revoked credential's bit was set by its issuer.
    pub revocations: BTreeMap<String, u64>,
    pub expected: BTreeMap<(String, String), ExpectedRecord>,
}

impl RunOutcome {
    pub fn label_of(&self, did: &Did) -> Option<&str> {
        self.dids.iter().find(|(_, d)| *d == did).map(|(l, _)| l.as_str())
    }
}

struct World {
    resolver: Resolver,
    registry: TrustRegistry,
    schemas: SchemaRegistry,
    catalog: Catalog,
}

impl World {
    fn env(&self) -> Environment<'_> {
        Environment { resolver: &self.resolver, registry: &self.registry, schemas: &self.schemas, catalog: &self.catalog }
    }
}

struct InFlight {
    deliver_at: u64,
    seq: u64,
    message: Message,
}

struct PendingTamper {
    outcome: usize,
    messages: BTreeSet<String>,
    monotonicity_rejections: BTreeSet<String>,
    delivered: BTreeSet<String>,
}

type Views = BTreeMap<(String, String), BTreeMap<String, AttributeView>>;

struct Sim {
    scenario: Scenario,
    world: World,
    orgs: BTreeMap<String, Organization>,
    agents: BTreeMap<String, Agent>,
    tiers: TrustTier,
    rng: ChaCha8Rng,
    in_flight: Vec<InFlight>,
    trace: Vec<TraceRecord>,
    seq: u64,
    audit: AuditLog,
    audit_payloads: Vec<Value>,
    checkpoints: Vec<Checkpoint>,
    directive_leaves: Vec<Option<u64>>,
    facts: BTreeMap<String, CredentialFact>,
    revocations: BTreeMap<String, u64>,
    verifications: Vec<VerificationSummary>,
    uses: Vec<UseRecord>,
    tamper: Vec<TamperOutcome>,
    pending_tamper: Vec<PendingTamper>,
    denied_transfers: u64,
    views: Vec<(u64, Views)>,
    forged: u64,
}

fn org_seed(seed: u64, label: &str) -> [u8; 32] {
    sha256_raw(format!("org:{seed}:{label}").as_bytes())
}

fn derive_u64(seed: u64, tag: &str, index: usize) -> u64 {
    let h = sha256_raw(format!("{tag}:{seed}:{index}").as_bytes());
    u64::from_be_bytes(h[..8].try_into().expect("8 bytes"))
}

/// Runs `scenario` to completion.
pub fn run(scenario: &Scenario) -> Result<RunOutcome, SimError> {
    let mut sim = Sim::new(scenario.clone());
    for tick in 0..scenario.ticks {
        let due: Vec<(usize, Directive)> = scenario
            .schedule
            .iter()
            .enumerate()
            .filter(|(_, e)| e.tick == tick)
            .map(|(i, e)| (i, e.directive.clone()))
            .collect();
        for (index, directive) in due {
            sim.fire(index, &directive, tick).map_err(|cause| SimError::DirectiveFailure {
                tick,
                index: Some(index),
                directive: directive.name(),
                cause,
            })?;
        }
        sim.settle(tick)
            .map_err(|cause| SimError::DirectiveFailure { tick, index: None, directive: "deliver", cause })?;
        sim.end_tick(tick);
    }
    Ok(sim.finish())
}

impl Sim {
    fn new(scenario: Scenario) -> Self {
        let op_label = scenario.operator().unwrap_or("").to_owned();
        let op = create_organization(&mut Resolver::new(), org_seed(scenario.seed, &op_label), 0)
            .expect("fresh resolver");
        let mut tiers = TrustTier::new(scenario.default_tier);
        for (label, rank) in &scenario.tiers {
            tiers = tiers.with(Did::from_public_key(crate::crypto::KeyPair::from_seed(org_seed(scenario.seed, label)).public()), *rank);
        }
        Sim {
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            directive_leaves: vec![None; scenario.schedule.len()],
            world: World {
                resolver: Resolver::new(),
                registry: TrustRegistry::new(&op),
                schemas: SchemaRegistry::new(),
                catalog: Catalog::new(),
            },
            scenario,
            orgs: BTreeMap::new(),
            agents: BTreeMap::new(),
            tiers,
            in_flight: Vec::new(),
            trace: Vec::new(),
            seq: 0,
            audit: AuditLog::new(),
            audit_payloads: Vec::new(),
            checkpoints: Vec::new(),
            facts: BTreeMap::new(),
            revocations: BTreeMap::new(),
            verifications: Vec::new(),
            uses: Vec::new(),
            tamper: Vec::new(),
            pending_tamper: Vec::new(),
            denied_transfers: 0,
            views: Vec::new(),
            forged: 0,
        }
    }

    fn append(&mut self, record: AuditRecord) -> u64 {
        self.audit_payloads.push(record.payload);
        self.audit.append(record.event)
    }

    fn trace(&mut self, tick: u64, event: TraceEvent, message: &Message) {
        self.trace.push(TraceRecord { seq: self.trace.len() as u64, tick, event, message: message.clone() });
    }

    fn send(&mut self, message: Message, tick: u64) {
        self.trace(tick, TraceEvent::Sent, &message);
        let loss = self.scenario.network.loss_permille;
        if loss > 0 && self.rng.random_range(0..1000u32) < loss {
            self.trace(tick, TraceEvent::Dropped, &message);
            return;
        }
        self.seq += 1;
        self.in_flight.push(InFlight { deliver_at: tick + self.scenario.network.delay_ticks, seq: self.seq, message });
    }

    fn inject(&mut self, message: Message, tick: u64) {
        self.trace(tick, TraceEvent::Injected, &message);
        self.seq += 1;
        self.in_flight.push(InFlight { deliver_at: tick + self.scenario.network.delay_ticks, seq: self.seq, message });
    }

    fn agent(&self, label: &str) -> Result<&Agent, DirectiveError> {
        self.agents.get(label).ok_or_else(|| DirectiveError::NotCreated(label.to_owned()))
    }

    fn agent_mut(&mut self, label: &str) -> Result<&mut Agent, DirectiveError> {
        self.agents.get_mut(label).ok_or_else(|| DirectiveError::NotCreated(label.to_owned()))
    }

    fn did(&self, label: &str) -> Result<Did, DirectiveError> {
        self.agent(label).map(|a| a.did().clone())
    }

    fn operator(&self) -> Result<String, DirectiveError> {
        let label = self.scenario.operator().ok_or(DirectiveError::NoOperator)?.to_owned();
        self.agent(&label)?;
        Ok(label)
    }

    fn everyone(&self) -> Vec<Did> {
        self.agents.values().map(|a| a.did().clone()).collect()
    }

    fn broadcast_status(&mut self, label: &str, tick: u64) -> Result<(), DirectiveError> {
        let everyone = self.everyone();
        let msgs = self.agent_mut(label)?.status_messages(&everyone, tick);
        for m in msgs {
            self.send(m, tick);
        }
        Ok(())
    }

    fn fact(&self, reference: &str) -> Result<&CredentialFact, DirectiveError> {
        self.facts.get(reference).ok_or_else(|| DirectiveError::UnknownReference(reference.to_owned()))
    }

    fn fire(&mut self, index: usize, directive: &Directive, tick: u64) -> Result<(), DirectiveError> {
        let base = json!({ "directive": index, "type": directive.name() });
        let (actor, counterparty, details) = self.execute(index, directive, tick)?;
        if let Some(event_type) = directive.event_type() {
            let mut payload = base;
            payload["details"] = details;
            let agent = self.agent(&actor)?;
            let record = agent.audit_record(event_type, counterparty, payload, tick);
            let leaf = self.append(record);
            self.directive_leaves[index] = Some(leaf);
        }
        Ok(())
    }

    /// Performs a directive, returning the acting label, the counterparty
    /// and the private details of the action.
    fn execute(&mut self, index: usize, directive: &Directive, tick: u64) -> Result<(String, Option<Did>, Value), DirectiveError> {
        let seed = self.scenario.seed;
        match directive {
            Directive::CreateOrg { org } => {
                if self.agents.contains_key(org) {
                    return Err(DirectiveError::AlreadyCreated(org.clone()));
                }
                let o = create_organization(&mut self.world.resolver, org_seed(seed, org), tick)?;
                let is_issuer = self.scenario.has_role(org, RoleHint::Issuer);
                let hosts = self.scenario.operator() == Some(org.as_str());
                let agent = Agent::new(o.clone(), self.tiers.clone(), is_issuer, hosts, tick);
                self.orgs.insert(org.clone(), o.clone());
                self.agents.insert(org.clone(), agent);
                if is_issuer {
                    self.broadcast_status(org, tick)?;
                }
                let issuers: Vec<String> = self
                    .agents
                    .iter()
                    .filter(|(l, a)| *l != org && a.issuer().is_some())
                    .map(|(l, _)| l.clone())
                    .collect();
                for l in issuers {
                    let msgs = self.agent_mut(&l)?.status_messages(std::slice::from_ref(&o.did), tick);
                    for m in msgs {
                        self.send(m, tick);
                    }
                }
                Ok((org.clone(), None, json!({ "did": o.did })))
            }
            Directive::RegisterTrust { issuer, schema_id, valid_from, valid_until } => {
                let op = self.operator()?;
                let issuer_did = self.did(issuer)?;
                let entry = TrustEntry {
                    issuer: issuer_did.clone(),
                    schema_id: schema_id.clone(),
                    valid_from: *valid_from,
                    valid_until: *valid_until,
                };
                let keys = self.orgs[&op].keys.clone();
                self.world.registry = self.world.registry.amend(entry.clone(), &keys)?;
                Ok((op, Some(issuer_did), json!({ "entry": entry })))
            }
            Directive::DefineSchema { schema } => {
                let op = self.operator()?;
                self.world.schemas.insert(schema.clone())?;
                Ok((op, None, json!({ "schemaId": schema.schema_id })))
            }
            Directive::IssueCredential {
                issuer,
                holder,
                reference,
                record_id,
                schema_id,
                attributes,
                expires_at,
                selective_disclosure,
            } => {
                if self.facts.contains_key(reference) {
                    return Err(DirectiveError::DuplicateReference(reference.clone()));
                }
                let schema = self
                    .world
                    .schemas
                    .get(schema_id)
                    .cloned()
                    .ok_or_else(|| DirectiveError::UnknownReference(schema_id.clone()))?;
                let holder_did = self.did(holder)?;
                let record = MasterDataRecord::new(record_id.clone(), attributes.clone());
                let options = IssueOptions {
                    expires_at: *expires_at,
                    selective_disclosure: *selective_disclosure,
                    rng_seed: derive_u64(seed, "issue", index),
                    ..Default::default()
                };
                let (vc, ds) = self.agent_mut(issuer)?.issue_credential(&holder_did, &record, &schema, tick, options)?;
                self.agent_mut(holder)?.accept_credential(vc.clone(), ds.clone());
                let id = vc.credential_id.clone();
                self.facts.insert(
                    reference.clone(),
                    CredentialFact {
                        reference: reference.clone(),
                        issuer: issuer.clone(),
                        holder: holder.clone(),
                        credential: vc,
                        disclosures: ds,
                    },
                );
                Ok((issuer.clone(), Some(holder_did), json!({ "credentialId": id })))
            }
            Directive::PublishAsset { provider, asset_id, schema_id, policy, disclose } => {
                let provider_did = self.did(provider)?;
                let policy = policy.as_ref().map(|p| UsagePolicy {
                    policy_id: p.policy_id.clone(),
                    assigner: provider_did.clone(),
                    permissions: p.permissions.clone(),
                    prohibitions: p.prohibitions.clone(),
                });
                let d = self.agent_mut(provider)?.publish_asset(asset_id, schema_id, policy, disclose.clone());
                let digest = d.description_digest.clone();
                self.world.catalog.publish(d, &self.world.resolver, &self.world.schemas)?;
                Ok((provider.clone(), None, json!({ "assetId": asset_id, "descriptionDigest": digest })))
            }
            Directive::StartNegotiation { consumer, asset_id } => {
                let op = self.operator()?;
                let host = self.did(&op)?;
                let provider = self.world.catalog.get(asset_id).map(|d| d.provider.clone());
                let msgs = self.agent_mut(consumer)?.start_negotiation(asset_id, &host, tick);
                for m in msgs {
                    self.send(m, tick);
                }
                Ok((consumer.clone(), provider, json!({ "assetId": asset_id })))
            }
            Directive::RequestTransfer { consumer, asset_id } => {
                let agent = self.agents.get_mut(consumer).ok_or_else(|| DirectiveError::NotCreated(consumer.clone()))?;
                let msg = agent
                    .request_transfer(asset_id, &self.world.catalog, tick)
                    .ok_or_else(|| DirectiveError::UnknownReference(asset_id.clone()))?;
                let provider = msg.recipient.clone();
                self.send(msg, tick);
                Ok((consumer.clone(), Some(provider), json!({ "assetId": asset_id })))
            }
            Directive::UseAsset { consumer, asset_id, action, purpose, region } => {
                let (decision, agreement_id) = self.agent_mut(consumer)?.use_asset(asset_id, *action, purpose, region, tick);
                self.uses.push(UseRecord {
                    consumer: consumer.clone(),
                    asset_id: asset_id.clone(),
                    tick,
                    decision,
                    agreement_id: agreement_id.clone(),
                });
                let provider = self.world.catalog.get(asset_id).map(|d| d.provider.clone());
                Ok((consumer.clone(), provider, json!({ "assetId": asset_id, "decision": decision, "agreementId": agreement_id })))
            }
            Directive::Revoke { issuer, reference } => {
                let fact = self.fact(reference)?.clone();
                if &fact.issuer != issuer {
                    return Err(DirectiveError::NotIssuer(issuer.clone()));
                }
                self.agent_mut(issuer)?.revoke_credential(fact.credential.status.index, tick)?;
                self.revocations.entry(fact.credential.credential_id.clone()).or_insert(tick);
                self.broadcast_status(issuer, tick)?;
                let holder = self.did(&fact.holder)?;
                Ok((issuer.clone(), Some(holder), json!({ "credentialId": fact.credential.credential_id })))
            }
            Directive::Supersede { issuer, reference, new_ref, attributes, expires_at } => {
                let old = self.fact(reference)?.clone();
                if &old.issuer != issuer {
                    return Err(DirectiveError::NotIssuer(issuer.clone()));
                }
                if self.facts.contains_key(new_ref) {
                    return Err(DirectiveError::DuplicateReference(new_ref.clone()));
                }
                let schema = self
                    .world
                    .schemas
                    .get(&old.credential.schema_id)
                    .cloned()
                    .ok_or_else(|| DirectiveError::UnknownReference(old.credential.schema_id.clone()))?;
                let holder_did = self.did(&old.holder)?;
                let record = MasterDataRecord::new(old.credential.record_id.clone(), attributes.clone());
                let options = IssueOptions {
                    expires_at: *expires_at,
                    supersedes: Some(old.credential.credential_id.clone()),
                    selective_disclosure: !old.disclosures.is_empty(),
                    rng_seed: derive_u64(seed, "issue", index),
                    ..Default::default()
                };
                let (vc, ds) = self.agent_mut(issuer)?.issue_credential(&holder_did, &record, &schema, tick, options)?;
                self.agent_mut(&old.holder)?.accept_credential(vc.clone(), ds.clone());
                self.agent_mut(issuer)?.revoke_credential(old.credential.status.index, tick)?;
                self.revocations.entry(old.credential.credential_id.clone()).or_insert(tick);
                self.broadcast_status(issuer, tick)?;
                let id = vc.credential_id.clone();
                self.facts.insert(
                    new_ref.clone(),
                    CredentialFact {
                        reference: new_ref.clone(),
                        issuer: issuer.clone(),
                        holder: old.holder.clone(),
                        credential: vc,
                        disclosures: ds,
                    },
                );
                Ok((
                    issuer.clone(),
                    Some(holder_did),
                    json!({ "credentialId": id, "supersedes": old.credential.credential_id }),
                ))
            }
            Directive::Verify { verifier, reference } => {
                let id = self.fact(reference)?.credential.credential_id.clone();
                let agent = self.agents.get_mut(verifier).ok_or_else(|| DirectiveError::NotCreated(verifier.clone()))?;
                let record = agent.reverify(&id, self.world.env(), tick);
                let verdict = record.as_ref().map(|r| r.report.verdict);
                if let Some(r) = record {
                    self.note_verification(verifier, &r);
                }
                Ok((verifier.clone(), None, json!({ "credentialId": id, "verdict": verdict })))
            }
            Directive::Revalidate { org } => {
                let agent = self.agents.get_mut(org).ok_or_else(|| DirectiveError::NotCreated(org.clone()))?;
                let inv = agent.revalidate(self.world.env(), tick);
                Ok((org.clone(), None, json!({ "invalidations": inv })))
            }
            Directive::RepublishStatus { issuer } => {
                if self.agent(issuer)?.issuer().is_none() {
                    return Err(DirectiveError::NotIssuer(issuer.clone()));
                }
                self.broadcast_status(issuer, tick)?;
                Ok((issuer.clone(), None, json!({})))
            }
            Directive::InjectTamper { target, leaf_index } => {
                self.tamper_with(*target, *leaf_index, tick)?;
                Ok((String::new(), None, Value::Null))
            }
        }
    }

    fn tamper_with(&mut self, target: TamperTarget, leaf_index: Option<u64>, tick: u64) -> Result<(), DirectiveError> {
        let outcome = self.tamper.len();
        let mut subjects = Vec::new();
        let mut detected = false;
        match target {
            TamperTarget::CredentialSignature | TamperTarget::DisclosureValue => {
                self.in_flight.sort_by_key(|f| f.seq);
                let pick = self.in_flight.iter().position(|f| {
                    f.message.kind == MessageKind::PresentationTransfer
                        && f.message.body["step"] == "deliver"
                        && (target == TamperTarget::CredentialSignature
                            || f.message.body["presentation"]["disclosed"].as_array().is_some_and(|d| !d.is_empty()))
                });
                let i = pick.ok_or_else(|| DirectiveError::NoSuchTarget(format!("{target:?}: no presentation in flight")))?;
                let body = &mut self.in_flight[i].message.body;
                if target == TamperTarget::CredentialSignature {
                    let sig = &mut body["presentation"]["credential"]["signature"]["value"];
                    let hex = sig.as_str().unwrap_or_default().to_owned();
                    *sig = Value::String(flip_hex(&hex));
                } else {
                    let v = &mut body["presentation"]["disclosed"][0]["value"];
                    *v = match v.take() {
                        Value::String(s) => Value::String(format!("{s} (altered)")),
                        Value::Number(n) => json!(n.as_i64().unwrap_or(0).wrapping_add(1)),
                        Value::Bool(b) => Value::Bool(!b),
                        other => other,
                    };
                }
                let m = self.in_flight[i].message.clone();
                self.trace(tick, TraceEvent::Tampered, &m);
                subjects.push(m.message_id.clone());
                self.pending_tamper.push(PendingTamper {
                    outcome,
                    messages: BTreeSet::from([m.message_id]),
                    monotonicity_rejections: BTreeSet::new(),
                    delivered: BTreeSet::new(),
                });
            }
            TamperTarget::StatusListBit => {
                let victim = self.agents.values().find_map(|a| {
                    let list = a.issuer()?.status_list().clone();
                    let bit = list.revoked_indices().first().copied()?;
                    Some((list, bit))
                });
                let (list, bit) = victim.ok_or_else(|| DirectiveError::NoSuchTarget("statusListBit: no set bit".into()))?;
                let mut bytes = hex::decode(&list.bits).unwrap_or_default();
                bytes[(bit / 8) as usize] &= !(1u8 << (bit % 8));
                let mut forged = list.clone();
                forged.bits = hex::encode(bytes);
                forged.updated_at = tick;
                let holders: Vec<Did> = self
                    .agents
                    .values()
                    .filter(|a| a.did() != &list.issuer)
                    .filter(|a| a.status_cache().get(&list.list_id).is_some_and(|l| l.bit(bit) == Ok(true)))
                    .map(|a| a.did().clone())
                    .collect();
                if holders.is_empty() {
                    return Err(DirectiveError::NoSuchTarget("statusListBit: no verifier holds the set bit".into()));
                }
                let mut ids = BTreeSet::new();
                for to in holders {
                    self.forged += 1;
                    let id = format!("forged-{}", self.forged);
                    let body = StatusListBody { list: forged.clone() };
                    let m = Message::new(id.clone(), MessageKind::StatusListPublish, list.issuer.clone(), to, &body, tick);
                    self.inject(m, tick);
                    ids.insert(id);
                }
                subjects.extend(ids.iter().cloned());
                self.pending_tamper.push(PendingTamper {
                    outcome,
                    messages: ids,
                    monotonicity_rejections: BTreeSet::new(),
                    delivered: BTreeSet::new(),
                });
            }
            TamperTarget::AuditLeaf => {
                let index = leaf_index.unwrap_or(0);
                let Some(original) = self.audit.events().get(index as usize).cloned() else {
                    return Err(DirectiveError::NoSuchTarget(format!("auditLeaf: index {index} of {}", self.audit.size())));
                };
                let before = self.audit.checkpoint();
                self.checkpoints.push(before.clone());
                let forged = AuditEvent { content_digest: sha256(b"rewritten"), ..original };
                self.audit.rewrite(index, forged).map_err(|_| DirectiveError::NoSuchTarget("auditLeaf".into()))?;
                detected = !self.prefix_consistent(&before);
                subjects.push(index.to_string());
            }
        }
        self.tamper.push(TamperOutcome {
            target,
            tick,
            check: target.designated_check().to_owned(),
            detected,
            subjects,
        });
        Ok(())
    }

    fn prefix_consistent(&self, cp: &Checkpoint) -> bool {
        if cp.size == 0 {
            return true;
        }
        match self.audit.tree().prove_consistency(cp.size) {
            Ok(proof) => verify_consistency(&cp.root, &self.audit.root(), &proof),
            Err(_) => false,
        }
    }

    fn note_verification(&mut self, verifier: &str, r: &VerificationRecord) {
        let stale = r.report.verdict == Verdict::Valid
            && self.revocations.get(&r.credential_id).is_some_and(|t| *t <= r.tick);
        self.verifications.push(VerificationSummary {
            verifier: verifier.to_owned(),
            credential_id: r.credential_id.clone(),
            message_id: r.message_id.clone(),
            tick: r.tick,
            verdict: r.report.verdict,
            failed: r.report.failed_checks().into_iter().map(|c| c.name().to_owned()).collect(),
            stale,
        });
        let Some(id) = &r.message_id else { return };
        for p in &self.pending_tamper {
            if p.messages.contains(id) {
                let t = &mut self.tamper[p.outcome];
                let check = match t.target {
                    TamperTarget::CredentialSignature => Check::Signature,
                    _ => Check::DisclosuresConsistent,
                };
                t.detected = r.report.verdict == Verdict::Invalid && !r.report.passed(check);
            }
        }
    }

    fn absorb(&mut self, label: &str, out: StepOutput, tick: u64) {
        for record in out.audit {
            self.append(record);
        }
        for v in &out.verifications {
            self.note_verification(label, v);
        }
        for r in &out.rejections {
            for p in &mut self.pending_tamper {
                if p.messages.contains(&r.message_id) && r.reason == NackReason::StatusRegression {
                    p.monotonicity_rejections.insert(r.message_id.clone());
                }
            }
        }
        self.denied_transfers += u64::from(out.denied_transfers);
        for m in out.outbox {
            self.send(m, tick);
        }
    }

    fn settle(&mut self, tick: u64) -> Result<(), DirectiveError> {
        for round in 0..MAX_ROUNDS {
            let mut due = Vec::new();
            let mut rest = Vec::new();
            for f in self.in_flight.drain(..) {
                if f.deliver_at <= tick {
                    due.push(f);
                } else {
                    rest.push(f);
                }
            }
            self.in_flight = rest;
            due.sort_by_key(|f| f.seq);
            let mut inboxes: BTreeMap<String, Vec<Message>> = BTreeMap::new();
            for f in due {
                let label = self.agents.iter().find(|(_, a)| a.did() == &f.message.recipient).map(|(l, _)| l.clone());
                match label {
                    Some(l) => {
                        self.trace(tick, TraceEvent::Delivered, &f.message);
                        for p in &mut self.pending_tamper {
                            if p.messages.contains(&f.message.message_id) {
                                p.delivered.insert(f.message.message_id.clone());
                            }
                        }
                        inboxes.entry(l).or_default().push(f.message);
                    }
                    None => self.trace(tick, TraceEvent::Undeliverable, &f.message),
                }
            }
            let labels: Vec<String> = self.agents.keys().cloned().collect();
            for label in labels {
                let inbox = inboxes.remove(&label).unwrap_or_default();
                if round > 0 && inbox.is_empty() {
                    continue;
                }
                let agent = self.agents.get_mut(&label).expect("listed");
                let out = agent.step(&inbox, tick, self.world.env());
                self.absorb(&label, out, tick);
            }
            if !self.in_flight.iter().any(|f| f.deliver_at <= tick) {
                return Ok(());
            }
        }
        Err(DirectiveError::Livelock)
    }

    fn subscriptions(&self) -> Vec<Subscription> {
        let mut out = Vec::new();
        for (provider, a) in &self.agents {
            for (asset_id, consumers) in a.subscribers() {
                let Some(asset) = a.own_assets().get(asset_id) else { continue };
                for c in consumers {
                    if let Some((label, agent)) = self.agents.iter().find(|(_, x)| x.did() == c) {
                        out.push(Subscription {
                            consumer: label.clone(),
                            provider: provider.clone(),
                            asset: asset.clone(),
                            tiers: agent.tiers().clone(),
                        });
                    }
                }
            }
        }
        out
    }

    fn current_views(&self) -> Views {
        let mut views = Views::new();
        for s in self.subscriptions() {
            let subject = self.agents[&s.provider].did().clone();
            let view = self.agents[&s.consumer].golden().view(&subject);
            views.insert((s.consumer, s.provider), view);
        }
        views
    }

    fn end_tick(&mut self, tick: u64) {
        if self.checkpoints.last().map(|c| c.size) != Some(self.audit.size()) && self.audit.size() > 0 {
            self.checkpoints.push(self.audit.checkpoint());
        }
        let views = self.current_views();
        if self.views.last().map(|(_, v)| v) != Some(&views) {
            self.views.push((tick, views));
        }
    }

    fn finish(mut self) -> RunOutcome {
        let final_tick = self.scenario.ticks.saturating_sub(1);
        let revoked: BTreeSet<String> = self.revocations.keys().cloned().collect();
        let expected = convergence_oracle(&self.facts, &revoked, &self.world.registry, &self.subscriptions(), final_tick);
        let mut convergence = Vec::new();
        for (key, exp) in &expected {
            let mut since = None;
            for (t, views) in self.views.iter().rev() {
                let empty = BTreeMap::new();
                if view_matches(exp, views.get(key).unwrap_or(&empty)) {
                    since = Some(*t);
                } else {
                    break;
                }
            }
            convergence.push(ConvergenceEntry {
                consumer: key.0.clone(),
                subject: key.1.clone(),
                converged: since.is_some(),
                convergence_tick: since,
            });
        }
        for p in std::mem::take(&mut self.pending_tamper) {
            let t = &mut self.tamper[p.outcome];
            if t.target == TamperTarget::StatusListBit {
                t.detected = !p.delivered.is_empty() && p.delivered == p.monotonicity_rejections;
            }
        }
        let checkpoints_consistent = self.checkpoints.iter().all(|c| self.prefix_consistent(c));
        let last_lifecycle_tick = self
            .scenario
            .schedule
            .iter()
            .filter(|e| e.directive.is_lifecycle())
            .map(|e| e.tick)
            .max();
        let count = |ev: TraceEvent| self.trace.iter().filter(|r| r.event == ev).count() as u64;
        let metrics = Metrics {
            message_count: count(TraceEvent::Sent) + count(TraceEvent::Injected),
            delivered_count: count(TraceEvent::Delivered),
            dropped_count: count(TraceEvent::Dropped),
            audit_root: self.audit.root(),
            audit_size: self.audit.size(),
            checkpoints_consistent,
            verification_count: self.verifications.len() as u64,
            stale_verification_count: self.verifications.iter().filter(|v| v.stale).count() as u64,
            denied_transfers: self.denied_transfers,
            last_lifecycle_tick,
            all_converged: convergence.iter().all(|c| c.converged),
            convergence,
        };
        let organizations = self
            .scenario
            .organizations
            .iter()
            .map(|o| OrgSummary {
                label: o.label.clone(),
                did: Did::from_public_key(crate::crypto::KeyPair::from_seed(org_seed(self.scenario.seed, &o.label)).public()),
                roles: o.roles.clone(),
            })
            .collect();
        let golden = self
            .agents
            .iter()
            .filter(|(_, a)| a.golden().records().next().is_some())
            .map(|(l, a)| (l.clone(), a.golden().records().cloned().collect()))
            .collect();
        let report = RunReport {
            name: self.scenario.name.clone(),
            seed: self.scenario.seed,
            ticks: self.scenario.ticks,
            organizations,
            metrics,
            tamper: self.tamper,
            verifications: self.verifications,
            uses: self.uses,
            golden,
        };
        let dids = self.agents.iter().map(|(l, a)| (l.clone(), a.did().clone())).collect();
        RunOutcome {
            scenario: self.scenario,
            report,
            trace: self.trace,
            audit: self.audit,
            audit_payloads: self.audit_payloads,
            checkpoints: self.checkpoints,
            directive_leaves: self.directive_leaves,
            dids,
            agents: self.agents,
            resolver: self.world.resolver,
            registry: self.world.registry,
            schemas: self.world.schemas,
            catalog: self.world.catalog,
            facts: self.facts,
            revocations: self.revocations,
            expected,
        }
    }
}

fn flip_hex(hex: &str) -> String {
    let mut chars: Vec<char> = hex.chars().collect();
    if let Some(c) = chars.first_mut() {
        *c = if *c == '0' { '1' } else { '0' };
    }
    chars.into_iter().collect()
}
