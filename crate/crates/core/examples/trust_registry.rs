//! Governance-operated trust registry: validity windows, overlap refusal
//! and operator-only amendment.

use sovereign_mdm::identity::{create_organization, Resolver, TrustEntry, TrustRegistry};

fn main() {
    let mut resolver = Resolver::new();
    let operator = create_organization(&mut resolver, [1; 32], 0).unwrap();
    let auditor = create_organization(&mut resolver, [6; 32], 0).unwrap();
    let schema = "mdm:business-partner:v1";

    let window = TrustEntry { issuer: auditor.did.clone(), schema_id: schema.into(), valid_from: 10, valid_until: Some(20) };
    let registry = TrustRegistry::new(&operator).amend(window.clone(), &operator.keys).unwrap();
    println!("registry signature ok: {}", registry.verify(&resolver));
    for tick in [5, 10, 20, 21] {
        println!("  auditor trusted at {tick:>2}: {}", registry.is_trusted_issuer(&auditor.did, schema, tick));
    }

    let overlapping = TrustEntry { valid_from: 15, valid_until: None, ..window.clone() };
    println!("overlapping entry: {:?}", registry.amend(overlapping, &operator.keys).unwrap_err());
    let later = TrustEntry { valid_from: 30, valid_until: None, ..window };
    println!("entry by non-operator: {:?}", registry.amend(later.clone(), &auditor.keys).unwrap_err());
    let extended = registry.amend(later, &operator.keys).unwrap();
    println!("trusted at 40 after extension: {}", extended.is_trusted_issuer(&auditor.did, schema, 40));
}
