//! Checks that re-derive run facts from the trace, the audit log and the
//! agents' persisted state instead of trusting the report.

use std::collections::BTreeMap;

use sovereign_mdm::audit::{AuditEvent, AuditLog, EventType};
use sovereign_mdm::credential::{StatusList, Verdict};
use sovereign_mdm::dataspace::{MessageKind, StatusListBody, TransferBody};
use sovereign_mdm::policy::NegotiationState;
use sovereign_mdm::sim::{RunOutcome, TraceEvent};

/// Every presentation sent for a gated asset carries an agreement that the
/// provider holds, that both parties signed, that came from a negotiation
/// passing through AGREED, and whose conclusion the provider logged no
/// later than the send. Returns the number of gated deliveries checked.
pub fn gated_transfers(o: &RunOutcome) -> Result<usize, String> {
    let mut checked = 0;
    for r in o.trace.iter().filter(|r| r.event == TraceEvent::Sent && r.message.kind == MessageKind::PresentationTransfer) {
        let m = &r.message;
        let Ok(TransferBody::Deliver { asset_id, agreement_id, .. }) = m.body_as::<TransferBody>() else {
            continue;
        };
        let asset = o.catalog.get(&asset_id).ok_or_else(|| format!("{}: asset {asset_id} not in catalog", m.message_id))?;
        if !asset.is_gated() {
            continue;
        }
        let id = agreement_id.ok_or_else(|| format!("{}: gated delivery without agreement", m.message_id))?;
        let provider = o
            .label_of(&m.sender)
            .and_then(|l| o.agents.get(l))
            .ok_or_else(|| format!("{}: unknown sender", m.message_id))?;
        let a = provider.agreements().get(&id).ok_or_else(|| format!("{}: provider lacks agreement {id}", m.message_id))?;
        if a.consumer != m.recipient || a.provider != m.sender || a.asset_id != asset_id {
            return Err(format!("{}: agreement {id} is for another party or asset", m.message_id));
        }
        if !a.verify(&o.resolver) {
            return Err(format!("{}: agreement {id} signatures do not verify", m.message_id));
        }
        let neg = provider
            .negotiations()
            .get(&a.negotiation_id)
            .ok_or_else(|| format!("{}: negotiation {} missing", m.message_id, a.negotiation_id))?;
        if neg.state != NegotiationState::Finalized || !neg.passed_through_agreement() || !neg.verify_transcript(&o.resolver) {
            return Err(format!("{}: negotiation {} did not pass through agreement", m.message_id, a.negotiation_id));
        }
        let logged = o.audit.events().iter().enumerate().any(|(i, e)| {
            let payload = &o.audit_payloads[i];
            e.event_type == EventType::AgreementConcluded
                && e.actor == m.sender
                && e.counterparty.as_ref() == Some(&m.recipient)
                && e.tick <= m.sent_at
                && payload["outcome"]["negotiationId"] == a.negotiation_id.as_str()
                && AuditEvent::over(e.event_type, e.actor.clone(), e.counterparty.clone(), payload, e.tick) == *e
        });
        if !logged {
            return Err(format!("{}: no logged conclusion for agreement {id}", m.message_id));
        }
        checked += 1;
    }
    Ok(checked)
}

/// Rebuilds the log from its text form and compares roots, then checks
/// that every leaf commits to its private payload.
pub fn audit_replay(o: &RunOutcome) -> Result<(), String> {
    let back = AuditLog::from_text(&o.audit.to_text()).map_err(|e| e.to_string())?;
    if back.root() != o.report.metrics.audit_root || back.size() != o.report.metrics.audit_size {
        return Err("replayed log disagrees with reported root".into());
    }
    if o.audit_payloads.len() as u64 != back.size() {
        return Err("payload count differs from log size".into());
    }
    for (i, (e, p)) in back.events().iter().zip(&o.audit_payloads).enumerate() {
        if AuditEvent::over(e.event_type, e.actor.clone(), e.counterparty.clone(), p, e.tick).content_digest != e.content_digest {
            let tampered = o.scenario.schedule.iter().any(|s| s.directive.name() == "injectTamper");
            if !tampered {
                return Err(format!("leaf {i} does not commit to its payload"));
            }
        }
    }
    Ok(())
}

/// Every schedule entry other than tampering owns exactly one audit leaf of
/// its declared type, whose actor resolves. Returns the number mapped.
pub fn directive_mapping(o: &RunOutcome) -> Result<usize, String> {
    let mut mapped = 0;
    for (i, entry) in o.scenario.schedule.iter().enumerate() {
        let d = &entry.directive;
        let leaf = o.directive_leaves.get(i).copied().flatten();
        let Some(ty) = d.event_type() else {
            if leaf.is_some() {
                return Err(format!("entry {i}: tampering left an audit leaf"));
            }
            continue;
        };
        let leaf = leaf.ok_or_else(|| format!("entry {i} ({}): no audit leaf", d.name()))? as usize;
        let e = &o.audit.events()[leaf];
        let p = &o.audit_payloads[leaf];
        if e.event_type != ty || p["directive"] != i || p["type"] != d.name() || e.tick != entry.tick {
            return Err(format!("entry {i} ({}): leaf {leaf} is {:?} {p}", d.name(), e.event_type));
        }
        o.resolver.resolve(e.actor.as_str()).map_err(|err| format!("entry {i}: {err}"))?;
        mapped += 1;
    }
    let carrying = o.audit_payloads.iter().filter(|p| p.get("directive").is_some()).count();
    if carrying != mapped {
        return Err(format!("{carrying} directive records in the log, {mapped} directives"));
    }
    Ok(mapped)
}

/// Stale verdicts recomputed from the trace alone: a Valid verdict on a
/// credential whose issuer had already sent a status list with its bit set.
/// Also checks that no verifier said Valid after a list with the bit was
/// delivered to it on an earlier tick.
pub fn stale_replay(o: &RunOutcome) -> Result<u64, String> {
    let mut revoked_at: BTreeMap<(String, u32), u64> = BTreeMap::new();
    let mut delivered_bit: BTreeMap<(String, String, u32), u64> = BTreeMap::new();
    for r in &o.trace {
        if r.message.kind != MessageKind::StatusListPublish {
            continue;
        }
        let Ok(StatusListBody { list }) = r.message.body_as::<StatusListBody>() else {
            continue;
        };
        let bits = set_bits(&list);
        match r.event {
            TraceEvent::Sent if list.issuer == r.message.sender => {
                for b in &bits {
                    revoked_at.entry((list.list_id.clone(), *b)).or_insert(r.message.sent_at);
                }
            }
            TraceEvent::Delivered => {
                let to = r.message.recipient.to_string();
                for b in bits {
                    delivered_bit.entry((to.clone(), list.list_id.clone(), b)).or_insert(r.tick);
                }
            }
            _ => {}
        }
    }
    let mut stale = 0;
    for v in &o.report.verifications {
        let verifier = o.dids[&v.verifier].to_string();
        let fact = o
            .facts
            .values()
            .find(|f| f.credential.credential_id == v.credential_id)
            .ok_or_else(|| format!("verification of unknown credential {}", v.credential_id))?;
        let slot = (fact.credential.status.list_id.clone(), fact.credential.status.index);
        let is_stale = v.verdict == Verdict::Valid && revoked_at.get(&slot).is_some_and(|t| *t <= v.tick);
        if is_stale != v.stale {
            return Err(format!("{} at {}: replay says stale={is_stale}", v.credential_id, v.tick));
        }
        let known = delivered_bit.get(&(verifier, slot.0, slot.1)).is_some_and(|t| *t < v.tick);
        if v.verdict == Verdict::Valid && known {
            return Err(format!("{} at {}: Valid although the verifier held the revocation", v.credential_id, v.tick));
        }
        stale += u64::from(is_stale);
    }
    if stale != o.report.metrics.stale_verification_count {
        return Err(format!("replay counts {stale} stale, report {}", o.report.metrics.stale_verification_count));
    }
    Ok(stale)
}

fn set_bits(list: &StatusList) -> Vec<u32> {
    (0..sovereign_mdm::credential::STATUS_LIST_LEN).filter(|i| list.bit(*i) == Ok(true)).collect()
}

/// No persisted status-list history ever clears a bit. Returns the number
/// of successive pairs compared.
pub fn monotone_histories(o: &RunOutcome) -> Result<usize, String> {
    let mut pairs = 0;
    for (label, agent) in &o.agents {
        let mut last: BTreeMap<&str, &StatusList> = BTreeMap::new();
        for list in agent.status_history() {
            if let Some(prev) = last.get(list.list_id.as_str()) {
                for b in set_bits(prev) {
                    if list.bit(b) != Ok(true) {
                        return Err(format!("{label}: {} clears bit {b} at {}", list.list_id, list.updated_at));
                    }
                }
                pairs += 1;
            }
            last.insert(&list.list_id, list);
        }
    }
    Ok(pairs)
}
