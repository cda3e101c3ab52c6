//! Contract negotiation from request to finalized agreement, then a use
//! ledger enforcing the agreed policy.

use sovereign_mdm::identity::{create_organization, Resolver};
use sovereign_mdm::policy::{
    authorize_use, conclude_agreement, Action, Constraint, Dimension, Negotiation, Operator, Rule, Transition,
    UsageContext, UsagePolicy, UseLedger,
};

fn main() {
    let mut resolver = Resolver::new();
    let supplier = create_organization(&mut resolver, [3; 32], 0).unwrap();
    let buyer = create_organization(&mut resolver, [8; 32], 0).unwrap();

    let mut policy = UsagePolicy::empty("pol-once", supplier.did.clone());
    policy.permissions.push(Rule::new(Action::Use, vec![Constraint::new(Dimension::UseCount, Operator::Lteq, 1).unwrap()]));

    let neg = Negotiation::request("neg-1", supplier.did.clone(), buyer.did.clone(), "supplier-bp").unwrap();
    let early = neg.transition(Transition::Agree, &supplier.keys, 1);
    println!("agree before offer: {:?}", early.unwrap_err());
    let neg = neg.transition(Transition::Offer(policy), &supplier.keys, 1).unwrap();
    let neg = neg.transition(Transition::Accept, &buyer.keys, 2).unwrap();
    let neg = neg.transition(Transition::Agree, &supplier.keys, 3).unwrap();
    let agreement = conclude_agreement(&neg, &supplier.keys, &buyer.keys, 3).unwrap();
    let neg = neg.transition(Transition::Finalize, &buyer.keys, 4).unwrap();
    for e in &neg.transcript {
        println!("  {:?} -> {:?} at {}", e.event, e.to, e.tick);
    }
    println!(
        "state {:?}, transcript ok {}, agreement ok {}",
        neg.state,
        neg.verify_transcript(&resolver),
        agreement.verify(&resolver)
    );

    let mut ledger = UseLedger::new();
    let ctx = UsageContext { action: Action::Use, purpose: "procurement".into(), tick: 5, region: "EU".into(), prior_use_count: 0 };
    println!("first use {:?}", authorize_use(&agreement, &ctx, &mut ledger));
    println!("second use {:?}", authorize_use(&agreement, &ctx, &mut ledger));
}
