//! Four dataspace agents on an in-memory bus: catalog discovery, contract
//! negotiation, a gated transfer and a policy-checked use.

use std::collections::BTreeMap;

use sovereign_mdm::credential::{CredentialSchema, IssueOptions, MasterDataRecord, SchemaRegistry};
use sovereign_mdm::dataspace::{Agent, Catalog, Environment, Message};
use sovereign_mdm::identity::{create_organization, Did, Resolver, TrustEntry, TrustRegistry};
use sovereign_mdm::mdm::TrustTier;
use sovereign_mdm::policy::{Action, Constraint, Dimension, Operator, Rule, UsagePolicy};

struct Bus {
    resolver: Resolver,
    registry: TrustRegistry,
    schemas: SchemaRegistry,
    catalog: Catalog,
    agents: BTreeMap<&'static str, Agent>,
}

impl Bus {
    fn label(&self, did: &Did) -> &'static str {
        self.agents.iter().find(|(_, a)| a.did() == did).map(|(l, _)| *l).unwrap()
    }

    /// Delivers until every agent is quiet.
    fn settle(&mut self, mut pending: Vec<Message>, tick: u64) {
        while !pending.is_empty() {
            let mut inboxes: BTreeMap<&str, Vec<Message>> = BTreeMap::new();
            for m in pending.drain(..) {
                println!("  t{tick} {:?} {} -> {}", m.kind, self.label(&m.sender), self.label(&m.recipient));
                inboxes.entry(self.label(&m.recipient)).or_default().push(m);
            }
            for (label, inbox) in inboxes {
                let env = Environment { resolver: &self.resolver, registry: &self.registry, schemas: &self.schemas, catalog: &self.catalog };
                let agent = self.agents.get_mut(label).unwrap();
                pending.extend(agent.step(&inbox, tick, env).outbox);
            }
        }
    }
}

fn main() {
    let mut resolver = Resolver::new();
    let seeds = [("operator", 1u8), ("registry", 2), ("supplier", 3), ("buyer", 4)];
    let orgs: BTreeMap<&str, _> =
        seeds.iter().map(|(l, s)| (*l, create_organization(&mut resolver, [*s; 32], 0).unwrap())).collect();
    let schema = CredentialSchema::business_partner();
    let mut schemas = SchemaRegistry::new();
    schemas.insert(schema.clone()).unwrap();
    let entry = TrustEntry { issuer: orgs["registry"].did.clone(), schema_id: schema.schema_id.clone(), valid_from: 0, valid_until: None };
    let registry = TrustRegistry::new(&orgs["operator"]).amend(entry, &orgs["operator"].keys).unwrap();
    let agents = orgs
        .iter()
        .map(|(l, o)| (*l, Agent::new(o.clone(), TrustTier::new(0), *l == "registry", *l == "operator", 0)))
        .collect();
    let mut bus = Bus { resolver, registry, schemas, catalog: Catalog::new(), agents };

    let supplier = orgs["supplier"].did.clone();
    let record = MasterDataRecord::new("bp-nordwerk", [("legalName", "Nordwerk GmbH"), ("address", "Hafenstrasse 4, Hamburg")]);
    let opts = IssueOptions { selective_disclosure: true, rng_seed: 11, ..Default::default() };
    let (vc, ds) = bus.agents.get_mut("registry").unwrap().issue_credential(&supplier, &record, &schema, 0, opts).unwrap();
    bus.agents.get_mut("supplier").unwrap().accept_credential(vc, ds);

    let mut policy = UsagePolicy::empty("pol-procurement", supplier.clone());
    policy.permissions.push(Rule::new(Action::Use, vec![Constraint::new(Dimension::Purpose, Operator::Eq, "procurement").unwrap()]));
    let asset = bus.agents.get_mut("supplier").unwrap().publish_asset(
        "supplier-bp",
        &schema.schema_id,
        Some(policy),
        vec!["legalName".into(), "address".into()],
    );
    bus.catalog.publish(asset, &bus.resolver, &bus.schemas).unwrap();

    println!("status lists");
    let everyone: Vec<Did> = orgs.values().map(|o| o.did.clone()).collect();
    let lists = bus.agents.get_mut("registry").unwrap().status_messages(&everyone, 0);
    bus.settle(lists, 0);

    println!("discovery and negotiation");
    let host = orgs["operator"].did.clone();
    let msgs = bus.agents.get_mut("buyer").unwrap().start_negotiation("supplier-bp", &host, 1);
    bus.settle(msgs, 1);

    println!("transfer");
    let catalog = bus.catalog.clone();
    let req = bus.agents.get_mut("buyer").unwrap().request_transfer("supplier-bp", &catalog, 2).unwrap();
    bus.settle(vec![req], 2);

    let buyer = bus.agents.get_mut("buyer").unwrap();
    println!("buyer golden record for the supplier:");
    for (name, (value, source, _)) in buyer.golden().view(&supplier) {
        println!("  {name:<10} {value} ({source})");
    }
    for purpose in ["procurement", "marketing"] {
        let (decision, _) = buyer.use_asset("supplier-bp", Action::Use, purpose, "EU", 3);
        println!("use for {purpose}: {decision:?}");
    }
}
