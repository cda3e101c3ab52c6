//! Generators and checks for the issue, present, verify and revoke cycle.

use std::collections::BTreeMap;

use proptest::prelude::*;
use sovereign_mdm::credential::{
    present, revoke, verify_presentation, AttributeKind, AttributeSpec, AttributeValue, Check, CredentialError,
    CredentialSchema, Disclosure, IssueOptions, Issuer, MasterDataRecord, Presentation, SchemaRegistry, StatusList,
    StatusUpdateError, Verdict, STATUS_LIST_LEN,
};
use sovereign_mdm::dataspace::{MessageKind, TransferBody};
use sovereign_mdm::identity::{create_organization, Organization, Resolver, TrustEntry, TrustRegistry};
use sovereign_mdm::sim::{run, TraceEvent};

#[derive(Debug, Clone)]
pub struct Case {
    pub specs: Vec<AttributeSpec>,
    pub record: BTreeMap<String, AttributeValue>,
    pub issuer_seed: [u8; 32],
    pub rng_seed: u64,
    pub selective: bool,
    pub tick: u64,
}

fn value_of(kind: AttributeKind) -> BoxedStrategy<AttributeValue> {
    match kind {
        AttributeKind::String => "[a-zA-Z0-9 ]{8,16}".prop_map(AttributeValue::String).boxed(),
        AttributeKind::Integer => any::<i64>().prop_map(AttributeValue::Integer).boxed(),
        AttributeKind::Boolean => any::<bool>().prop_map(AttributeValue::Boolean).boxed(),
    }
}

/// A random schema of one to six attributes, a conforming record, an
/// issuer key seed and issuance options.
pub fn case() -> impl Strategy<Value = Case> {
    let kind = prop_oneof![Just(AttributeKind::String), Just(AttributeKind::Integer), Just(AttributeKind::Boolean)];
    prop::collection::vec((kind, any::<bool>(), any::<bool>(), any::<bool>()), 1..7)
        .prop_flat_map(|attrs| {
            let specs: Vec<AttributeSpec> = attrs
                .iter()
                .enumerate()
                .map(|(i, (kind, req, disc, _))| AttributeSpec {
                    name: format!("attr{i}"),
                    kind: *kind,
                    required: *req || i == 0,
                    disclosable: *disc,
                })
                .collect();
            let values: Vec<BoxedStrategy<Option<AttributeValue>>> = specs
                .iter()
                .zip(&attrs)
                .map(|(s, (_, _, _, present))| {
                    if s.required || *present {
                        value_of(s.kind).prop_map(Some).boxed()
                    } else {
                        Just(None).boxed()
                    }
                })
                .collect();
            (Just(specs), values, any::<[u8; 32]>(), any::<u64>(), any::<bool>(), 0u64..1000)
        })
        .prop_map(|(specs, values, issuer_seed, rng_seed, selective, tick)| {
            let record = specs
                .iter()
                .zip(values)
                .filter_map(|(s, v)| v.map(|v| (s.name.clone(), v)))
                .collect();
            Case { specs, record, issuer_seed, rng_seed, selective, tick }
        })
}

pub struct World {
    pub resolver: Resolver,
    pub registry: TrustRegistry,
    pub schemas: SchemaRegistry,
    pub issuer: Issuer,
    pub holder: Organization,
}

pub fn world(c: &Case) -> World {
    let schema = CredentialSchema::new("test:schema:v1", c.specs.clone()).unwrap();
    let mut resolver = Resolver::new();
    let org = create_organization(&mut resolver, c.issuer_seed, 0).unwrap();
    let mut holder_seed = c.issuer_seed;
    holder_seed[0] ^= 0xff;
    let holder = create_organization(&mut resolver, holder_seed, 0).unwrap();
    let mut op_seed = c.issuer_seed;
    op_seed[1] ^= 0xff;
    let operator = create_organization(&mut resolver, op_seed, 0).unwrap();
    let entry = TrustEntry { issuer: org.did.clone(), schema_id: schema.schema_id.clone(), valid_from: 0, valid_until: None };
    let registry = TrustRegistry::new(&operator).amend(entry, &operator.keys).unwrap();
    let mut schemas = SchemaRegistry::new();
    schemas.insert(schema).unwrap();
    World { resolver, registry, schemas, issuer: Issuer::new(org, 0), holder }
}

/// Issues the case's credential and presents every disclosable attribute.
pub fn issue_and_present(c: &Case) -> (World, Presentation, Vec<Disclosure>) {
    let mut w = world(c);
    let schema = w.schemas.get("test:schema:v1").unwrap().clone();
    let record = MasterDataRecord { record_id: "rec-1".into(), attributes: c.record.clone() };
    let opts = IssueOptions { selective_disclosure: c.selective, rng_seed: c.rng_seed, ..Default::default() };
    let (vc, ds) = w.issuer.issue(&w.holder.did, &record, &schema, c.tick, opts).unwrap();
    let names: Vec<&str> = ds.iter().map(|d| d.name.as_str()).collect();
    let p = present(&w.holder.keys, &vc, &ds, &names, c.tick).unwrap();
    (w, p, ds)
}

pub fn statuses(list: &StatusList) -> BTreeMap<String, StatusList> {
    BTreeMap::from([(list.list_id.clone(), list.clone())])
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Valid on issue; after revocation Invalid with only notRevoked failing.
pub fn round_trip(c: &Case) -> Result<(), String> {
    let (mut w, p, _) = issue_and_present(c);
    let lists = statuses(w.issuer.status_list());
    let report = verify_presentation(&p, &w.resolver, &w.registry, &lists, &w.schemas, c.tick);
    ensure!(report.verdict == Verdict::Valid, "fresh credential failed {:?}", report.failed_checks());
    let revoked = w.issuer.revoke(p.credential.status.index, c.tick + 1).map_err(|e| e.to_string())?.clone();
    ensure!(revoked.verify(&w.resolver), "revoked list does not verify");
    let report = verify_presentation(&p, &w.resolver, &w.registry, &statuses(&revoked), &w.schemas, c.tick + 1);
    ensure!(
        report.verdict == Verdict::Invalid && report.failed_checks() == vec![Check::NotRevoked],
        "after revocation: {:?} {:?}",
        report.verdict,
        report.failed_checks()
    );
    Ok(())
}

/// A key other than the issuer's can neither revoke, re-sign, nor replace
/// the issuer's list.
pub fn foreign_revocation(c: &Case, foreign: [u8; 32], index: u32) -> Result<(), String> {
    let w = world(c);
    let mut r = Resolver::new();
    let intruder = create_organization(&mut r, foreign, 0).unwrap();
    let list = w.issuer.status_list();
    ensure!(revoke(&intruder.keys, list, index, 1) == Err(CredentialError::NotIssuer), "foreign revoke not refused");
    let mut forged = revoke(&w.issuer.organization().keys, list, index, 1).unwrap();
    forged.signature = intruder.sign(&forged.payload());
    ensure!(!forged.verify(&w.resolver), "re-signed list verifies");
    let relabeled = revoke(&intruder.keys, &StatusList::new(&intruder, list.list_id.clone(), 1), index, 1).unwrap();
    ensure!(list.accepts_successor(&relabeled) == Err(StatusUpdateError::WrongList), "foreign list accepted");
    Ok(())
}

pub fn revocation_index() -> impl Strategy<Value = u32> {
    0..STATUS_LIST_LEN
}

#[derive(Debug, Clone, Copy)]
pub enum Field {
    Salt,
    Name,
    Value,
}

pub fn field() -> impl Strategy<Value = Field> {
    prop_oneof![Just(Field::Salt), Just(Field::Name), Just(Field::Value)]
}

/// Changes exactly one byte of the chosen field.
pub fn mutate(d: &mut Disclosure, field: Field, pos: usize, byte: u8) {
    fn swap_char(s: &mut String, pos: usize, byte: u8) {
        let mut bytes = s.clone().into_bytes();
        let i = pos % bytes.len();
        let mut b = b'!' + byte % 90;
        if b == bytes[i] {
            b = if b == b'~' { b'!' } else { b + 1 };
        }
        bytes[i] = b;
        *s = String::from_utf8(bytes).unwrap();
    }
    match field {
        Field::Salt => swap_char(&mut d.salt, pos, byte),
        Field::Name => swap_char(&mut d.name, pos, byte),
        Field::Value => match &mut d.value {
            AttributeValue::String(s) => swap_char(s, pos, byte),
            AttributeValue::Integer(v) => *v ^= i64::from(byte.max(1)) << (8 * (pos % 8)),
            AttributeValue::Boolean(b) => *b = !*b,
        },
    }
}

/// Mutates one disclosure of a fresh presentation and expects
/// disclosuresConsistent to fail.
pub fn disclosure_mutation(c: &Case, pick: usize, field: Field, pos: usize, byte: u8) -> Result<(), String> {
    let mut c = c.clone();
    c.selective = true;
    c.specs[0].disclosable = true;
    let (w, mut p, _) = issue_and_present(&c);
    ensure!(!p.disclosed.is_empty(), "nothing disclosed");
    let i = pick % p.disclosed.len();
    let before = p.disclosed[i].clone();
    mutate(&mut p.disclosed[i], field, pos, byte);
    ensure!(before != p.disclosed[i], "mutation was a no-op");
    let lists = statuses(w.issuer.status_list());
    let report = verify_presentation(&p, &w.resolver, &w.registry, &lists, &w.schemas, c.tick);
    ensure!(!report.passed(Check::DisclosuresConsistent), "{field:?} mutation unnoticed");
    ensure!(report.verdict == Verdict::Invalid, "mutated presentation judged Valid");
    Ok(())
}

/// Presents a subset of the disclosures and scans the serialized
/// presentation for withheld salts and string values.
pub fn withheld_stay_hidden(c: &Case, keep: u8) -> Result<(), String> {
    let (w, full, ds) = issue_and_present(c);
    let names: Vec<&str> =
        ds.iter().enumerate().filter(|(i, _)| keep >> (i % 8) & 1 == 1).map(|(_, d)| d.name.as_str()).collect();
    let p = present(&w.holder.keys, &full.credential, &ds, &names, c.tick).unwrap();
    let text = serde_json::to_string(&p).unwrap();
    for d in ds.iter().filter(|d| !names.contains(&d.name.as_str())) {
        ensure!(!text.contains(&d.salt), "salt of {} leaked", d.name);
        if let AttributeValue::String(v) = &d.value {
            ensure!(!text.contains(v.as_str()), "{} leaked", d.name);
        }
    }
    Ok(())
}

/// Every presentation in every bundled scenario opens only digests its
/// credential lists and never carries a held but unrevealed value.
/// Returns (openings checked, withheld disclosures scanned).
pub fn scenario_disclosures() -> Result<(usize, usize), String> {
    let mut opened = 0;
    let mut withheld = 0;
    for (name, _, s) in super::bundled() {
        let o = run(&s).map_err(|e| e.to_string())?;
        let tampered: Vec<&str> =
            o.trace.iter().filter(|r| r.event == TraceEvent::Tampered).map(|r| r.message.message_id.as_str()).collect();
        for r in o.trace.iter().filter(|r| r.message.kind == MessageKind::PresentationTransfer) {
            let Ok(TransferBody::Deliver { presentation: p, .. }) = r.message.body_as::<TransferBody>() else {
                continue;
            };
            let id = r.message.message_id.as_str();
            if !tampered.contains(&id) {
                for d in &p.disclosed {
                    ensure!(p.credential.claims.digests.contains(&d.digest()), "{name}: {id} bad opening of {}", d.name);
                    opened += 1;
                }
            }
            let text = serde_json::to_string(&p).unwrap();
            let holder = o.label_of(&p.holder).ok_or_else(|| format!("{name}: unknown holder"))?;
            let held = o.agents[holder].wallet().disclosures.get(&p.credential.credential_id).cloned().unwrap_or_default();
            for d in held.iter().filter(|d| !p.disclosed.iter().any(|x| x.name == d.name)) {
                ensure!(!text.contains(&d.salt), "{name}: {id} leaks the salt of {}", d.name);
                if let AttributeValue::String(v) = &d.value {
                    ensure!(!text.contains(&format!("\"{v}\"")), "{name}: {id} leaks {}", d.name);
                }
                withheld += 1;
            }
        }
    }
    Ok((opened, withheld))
}

/// Status-list histories persisted by every agent in every bundled
/// scenario. Returns the number of successive pairs compared.
pub fn scenario_monotonicity() -> Result<usize, String> {
    let mut pairs = 0;
    for (name, _, s) in super::bundled() {
        let o = run(&s).map_err(|e| e.to_string())?;
        pairs += super::replay::monotone_histories(&o).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(pairs)
}
