//! Golden-record merge across issuers of different trust tiers, and
//! fallback to the next source when the preferred one is revoked.

use std::collections::BTreeMap;

use sovereign_mdm::credential::{
    present, verify_presentation, CredentialSchema, IssueOptions, Issuer, MasterDataRecord, SchemaRegistry,
};
use sovereign_mdm::identity::{create_organization, Resolver, TrustEntry, TrustRegistry};
use sovereign_mdm::mdm::{GoldenStore, TrustTier};

fn main() {
    let mut resolver = Resolver::new();
    let operator = create_organization(&mut resolver, [1; 32], 0).unwrap();
    let reg = create_organization(&mut resolver, [2; 32], 0).unwrap();
    let bank = create_organization(&mut resolver, [4; 32], 0).unwrap();
    let supplier = create_organization(&mut resolver, [3; 32], 0).unwrap();
    let schema = CredentialSchema::business_partner();
    let mut schemas = SchemaRegistry::new();
    schemas.insert(schema.clone()).unwrap();
    let mut registry = TrustRegistry::new(&operator);
    for org in [&reg, &bank] {
        let entry = TrustEntry { issuer: org.did.clone(), schema_id: schema.schema_id.clone(), valid_from: 0, valid_until: None };
        registry = registry.amend(entry, &operator.keys).unwrap();
    }
    let tiers = TrustTier::new(5).with(reg.did.clone(), 0).with(bank.did.clone(), 1);

    let mut reg_issuer = Issuer::new(reg, 0);
    let mut bank_issuer = Issuer::new(bank, 0);
    let from_reg = MasterDataRecord::new("bp-1", [("legalName", "Nordwerk GmbH"), ("address", "Hafenstrasse 4")]);
    let from_bank = MasterDataRecord::new(
        "bp-1",
        [("legalName", "Nordwerk G.m.b.H."), ("address", "Hafenstr. 4"), ("bankAccount", "DE44 5001 0517 5407 3249 31")],
    );
    let (vc_reg, _) = reg_issuer.issue(&supplier.did, &from_reg, &schema, 1, IssueOptions::default()).unwrap();
    let (vc_bank, _) = bank_issuer.issue(&supplier.did, &from_bank, &schema, 1, IssueOptions::default()).unwrap();

    let mut lists = BTreeMap::new();
    lists.insert(reg_issuer.status_list().list_id.clone(), reg_issuer.status_list().clone());
    lists.insert(bank_issuer.status_list().list_id.clone(), bank_issuer.status_list().clone());

    let mut store = GoldenStore::new();
    for vc in [&vc_bank, &vc_reg] {
        let p = present(&supplier.keys, vc, &[], &[], 2).unwrap();
        let report = verify_presentation(&p, &resolver, &registry, &lists, &schemas, 2);
        store.ingest(&report, &p, 2, &tiers).unwrap();
    }
    let show = |store: &GoldenStore, label: &str| {
        println!("{label}");
        for (name, (value, source, invalid)) in store.view(&supplier.did) {
            println!("  {name:<12} {value:<30} from {source}{}", if invalid { " (invalid)" } else { "" });
        }
    };
    show(&store, "merged at tick 2");

    let revoked = reg_issuer.revoke(vc_reg.status.index, 5).unwrap().clone();
    lists.insert(revoked.list_id.clone(), revoked);
    let changed = store.revalidate(&resolver, &registry, &lists, &tiers, 5);
    println!("{} attributes fell back after revocation", changed.len());
    show(&store, "after revoking the registry credential");
}
