//! Usage-policy evaluation with deny-overrides and default-deny.

use sovereign_mdm::identity::Did;
use sovereign_mdm::policy::{evaluate_since, Action, Constraint, Dimension, Operator, Rule, UsageContext, UsagePolicy};

fn main() {
    let provider = Did::from_public_key(&[9; 32]);
    let mut policy = UsagePolicy::empty("pol-procurement", provider);
    policy.permissions.push(Rule::new(
        Action::Use,
        vec![
            Constraint::new(Dimension::Purpose, Operator::Eq, "procurement").unwrap(),
            Constraint::new(Dimension::ElapsedTick, Operator::Lteq, 30).unwrap(),
            Constraint::new(Dimension::UseCount, Operator::Lteq, 2).unwrap(),
        ],
    ));
    policy.prohibitions.push(Rule::new(Action::Use, vec![Constraint::new(Dimension::Region, Operator::Eq, "US").unwrap()]));
    policy.validate().unwrap();

    let agreed_at = 10;
    let cases = [
        ("procurement in EU", Action::Use, "procurement", "EU", 15, 0),
        ("third use", Action::Use, "procurement", "EU", 15, 2),
        ("window over", Action::Use, "procurement", "EU", 41, 0),
        ("prohibited region", Action::Use, "procurement", "US", 15, 0),
        ("marketing", Action::Use, "marketing", "EU", 15, 0),
        ("distribute", Action::Distribute, "procurement", "EU", 15, 0),
    ];
    for (label, action, purpose, region, tick, prior) in cases {
        let ctx = UsageContext { action, purpose: purpose.into(), tick, region: region.into(), prior_use_count: prior };
        println!("{label:<20} {:?}", evaluate_since(&policy, &ctx, agreed_at));
    }
}
