//! Run artifacts on disk and the human summary.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::run::{RunOutcome, RunReport};
use crate::audit::checkpoints_to_text;
use crate::crypto::to_canonical;

fn canonical<T: Serialize + ?Sized>(value: &T) -> String {
    to_canonical(value).expect("run artifacts hold no floats").as_str().to_owned()
}

fn lines<'a, T: Serialize + 'a>(items: impl IntoIterator<Item = &'a T>) -> String {
    items.into_iter().map(|i| canonical(i) + "\n").collect()
}

/// Keeps file names to one path component.
pub fn file_name(id: &str) -> String {
    id.chars().map(|c| if c == '/' || c == '\\' { '_' } else { c }).collect()
}

fn put(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(file_name(name)), contents)
}

/// Writes the trace, audit log, checkpoints, report, shared registry files
/// and one wallet directory per organization under `dir`.
pub fn write_outputs(dir: &Path, outcome: &RunOutcome) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trace.msgs"), lines(&outcome.trace))?;
    fs::write(dir.join("audit.log"), outcome.audit.to_text())?;
    fs::write(dir.join("audit.checkpoints"), checkpoints_to_text(&outcome.checkpoints))?;
    fs::write(dir.join("report.run"), canonical(&outcome.report) + "\n")?;
    fs::write(dir.join("registry.trust"), canonical(&outcome.registry) + "\n")?;
    for doc in outcome.resolver.documents() {
        put(&dir.join("dids"), &format!("{}.diddoc", doc.id), &(canonical(doc) + "\n"))?;
    }
    for schema in outcome.schemas.iter() {
        put(&dir.join("schemas"), &format!("{}.schema", schema.schema_id), &(canonical(schema) + "\n"))?;
    }
    for (label, agent) in &outcome.agents {
        let w = dir.join("wallet").join(agent.did().as_str());
        put(&w, "wallet.meta", &(canonical(&json!({ "did": agent.did(), "label": label, "tick": outcome.report.ticks.saturating_sub(1) })) + "\n"))?;
        fs::create_dir_all(w.join("credentials"))?;
        fs::create_dir_all(w.join("statuslists"))?;
        fs::create_dir_all(w.join("golden"))?;
        for (id, vc) in &agent.wallet().credentials {
            put(&w.join("credentials"), &format!("{id}.vc"), &(canonical(vc) + "\n"))?;
        }
        for (id, ds) in &agent.wallet().disclosures {
            if !ds.is_empty() {
                put(&w.join("disclosures"), &format!("{id}.disclosures"), &(canonical(ds) + "\n"))?;
            }
        }
        for (id, list) in agent.status_cache() {
            put(&w.join("statuslists"), &format!("{id}.status"), &(canonical(list) + "\n"))?;
        }
        put(&w.join("statuslists"), "history.statuses", &lines(agent.status_history()))?;
        for (id, p) in agent.received() {
            put(&w.join("presentations"), &format!("{id}.pres"), &(canonical(p) + "\n"))?;
        }
        for record in agent.golden().records() {
            put(&w.join("golden"), &format!("{}.record", record.internal_id), &(canonical(record) + "\n"))?;
        }
        for (id, a) in agent.agreements() {
            put(&w.join("agreements"), &format!("{id}.agreement"), &(canonical(a) + "\n"))?;
        }
        for (id, policy) in agent.policies() {
            put(&w.join("policies"), &format!("{id}.odrl"), &(canonical(policy) + "\n"))?;
        }
    }
    Ok(())
}

/// The table printed after a run.
pub fn summary_table(report: &RunReport) -> String {
    let m = &report.metrics;
    let mut out = String::new();
    let _ = writeln!(out, "scenario  {}  seed {}  ticks {}", report.name, report.seed, report.ticks);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<16} {:<42} ROLES", "ORG", "DID");
    for o in &report.organizations {
        let roles: Vec<String> = o.roles.iter().map(|r| format!("{r:?}").to_lowercase()).collect();
        let _ = writeln!(out, "{:<16} {:<42} {}", o.label, o.did, roles.join(","));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "messages {}  delivered {}  dropped {}", m.message_count, m.delivered_count, m.dropped_count);
    let _ = writeln!(
        out,
        "verifications {}  stale {}  denied transfers {}",
        m.verification_count, m.stale_verification_count, m.denied_transfers
    );
    let _ = writeln!(out, "audit size {}  root {}", m.audit_size, m.audit_root);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<16} {:<16} CONVERGED AT", "CONSUMER", "SUBJECT");
    for c in &m.convergence {
        let at = c.convergence_tick.map_or_else(|| "NOT CONVERGED".to_owned(), |t| t.to_string());
        let _ = writeln!(out, "{:<16} {:<16} {}", c.consumer, c.subject, at);
    }
    if !report.tamper.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<22} {:<24} DETECTED", "TAMPER", "CHECK");
        for t in &report.tamper {
            let _ = writeln!(out, "{:<22} {:<24} {}", format!("{:?}", t.target), t.check, t.detected);
        }
    }
    out
}
