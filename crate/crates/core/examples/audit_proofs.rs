//! Content-blind audit log with inclusion and consistency proofs, and a
//! rewritten leaf exposed by an old checkpoint.

use serde_json::json;
use sovereign_mdm::audit::{leaf_hash, verify_consistency, verify_inclusion, AuditEvent, AuditLog, EventType};
use sovereign_mdm::crypto::Digest;
use sovereign_mdm::identity::Did;

fn main() {
    let actor = Did::from_public_key(&[3; 32]);
    let mut log = AuditLog::new();
    for i in 0..7u64 {
        let payload = json!({"credentialId": format!("vc-{i}"), "holder": "Nordwerk GmbH"});
        log.append(AuditEvent::over(EventType::Issued, actor.clone(), None, &payload, i));
    }
    println!("size {} root {}", log.size(), log.root());
    println!("log text mentions the holder: {}", log.to_text().contains("Nordwerk"));

    let e = &log.events()[4];
    let proof = log.tree().prove_inclusion(4).unwrap();
    let leaf = Digest::from_bytes(leaf_hash(&e.leaf_data()));
    println!("leaf 4 included: {} ({} path nodes)", verify_inclusion(&log.root(), &leaf, &proof), proof.path.len());

    let checkpoint = log.tree().root_at(4).unwrap();
    let c = log.tree().prove_consistency(4).unwrap();
    println!("size 7 extends size 4: {}", verify_consistency(&checkpoint, &log.root(), &c));

    let forged = AuditEvent::over(EventType::Revoked, actor, None, &json!({"cover": "up"}), 1);
    log.rewrite(1, forged).unwrap();
    let c = log.tree().prove_consistency(4).unwrap();
    println!("after rewriting leaf 1: {}", verify_consistency(&checkpoint, &log.root(), &c));
}
