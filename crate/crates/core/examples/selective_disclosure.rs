//! Salted-digest selective disclosure: reveal the legal name, keep the bank
//! account private, and watch a modified opening get caught.

use std::collections::BTreeMap;

use sovereign_mdm::credential::{
    present, verify_presentation, AttributeValue, Check, CredentialSchema, IssueOptions, Issuer, MasterDataRecord,
    SchemaRegistry,
};
use sovereign_mdm::identity::{create_organization, Resolver, TrustEntry, TrustRegistry};

fn main() {
    let mut resolver = Resolver::new();
    let operator = create_organization(&mut resolver, [1; 32], 0).unwrap();
    let bank = create_organization(&mut resolver, [2; 32], 0).unwrap();
    let supplier = create_organization(&mut resolver, [3; 32], 0).unwrap();
    let schema = CredentialSchema::business_partner();
    let mut schemas = SchemaRegistry::new();
    schemas.insert(schema.clone()).unwrap();
    let entry = TrustEntry { issuer: bank.did.clone(), schema_id: schema.schema_id.clone(), valid_from: 0, valid_until: None };
    let registry = TrustRegistry::new(&operator).amend(entry, &operator.keys).unwrap();

    let mut issuer = Issuer::new(bank, 0);
    let record = MasterDataRecord::new(
        "bp-nordwerk",
        [("legalName", "Nordwerk GmbH"), ("address", "Hafenstrasse 4"), ("bankAccount", "DE44 5001 0517 5407 3249 31")],
    );
    let opts = IssueOptions { selective_disclosure: true, rng_seed: 7, ..Default::default() };
    let (vc, wallet) = issuer.issue(&supplier.did, &record, &schema, 1, opts).unwrap();
    println!("credential carries {} digests and {} plain attributes", vc.claims.digests.len(), vc.claims.attributes.len());

    let p = present(&supplier.keys, &vc, &wallet, &["legalName", "address"], 2).unwrap();
    let wire = serde_json::to_string(&p).unwrap();
    println!("revealed: {:?}", p.revealed().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>());
    println!("bank account on the wire: {}", wire.contains("DE44"));

    let lists = BTreeMap::from([(vc.status.list_id.clone(), issuer.status_list().clone())]);
    let ok = verify_presentation(&p, &resolver, &registry, &lists, &schemas, 3);
    println!("honest presentation: {:?}", ok.verdict);

    let mut forged = p.clone();
    forged.disclosed[0].value = AttributeValue::from("Nordwerk Holding AG");
    let bad = verify_presentation(&forged, &resolver, &registry, &lists, &schemas, 3);
    println!(
        "altered opening: {:?}, disclosuresConsistent passed = {}",
        bad.verdict,
        bad.passed(Check::DisclosuresConsistent)
    );
}
