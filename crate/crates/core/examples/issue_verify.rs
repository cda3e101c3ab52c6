//! Issue a business-partner credential, present it and verify it against
//! the trust registry and the issuer's status list.

use std::collections::BTreeMap;

use sovereign_mdm::credential::{
    present, verify_presentation, CredentialSchema, IssueOptions, Issuer, MasterDataRecord, SchemaRegistry,
};
use sovereign_mdm::identity::{create_organization, Resolver, TrustEntry, TrustRegistry};

fn main() {
    let mut resolver = Resolver::new();
    let operator = create_organization(&mut resolver, [1; 32], 0).unwrap();
    let registry_org = create_organization(&mut resolver, [2; 32], 0).unwrap();
    let supplier = create_organization(&mut resolver, [3; 32], 0).unwrap();

    let schema = CredentialSchema::business_partner();
    let mut schemas = SchemaRegistry::new();
    schemas.insert(schema.clone()).unwrap();
    let entry = TrustEntry { issuer: registry_org.did.clone(), schema_id: schema.schema_id.clone(), valid_from: 0, valid_until: None };
    let registry = TrustRegistry::new(&operator).amend(entry, &operator.keys).unwrap();

    let mut issuer = Issuer::new(registry_org, 0);
    let record = MasterDataRecord::new("bp-nordwerk", [("legalName", "Nordwerk GmbH"), ("address", "Hafenstrasse 4, Hamburg")]);
    let (vc, _) = issuer.issue(&supplier.did, &record, &schema, 1, IssueOptions::default()).unwrap();
    println!("issued {} v{} to {}", vc.credential_id, vc.version, vc.subject);

    let p = present(&supplier.keys, &vc, &[], &[], 2).unwrap();
    let lists = BTreeMap::from([(vc.status.list_id.clone(), issuer.status_list().clone())]);
    let report = verify_presentation(&p, &resolver, &registry, &lists, &schemas, 3);
    for (check, outcome) in &report.checks {
        println!("  {:<22} {outcome:?}", check.name());
    }
    println!("verdict {:?}", report.verdict);
}
