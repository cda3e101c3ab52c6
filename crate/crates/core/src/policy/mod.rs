//! Usage policies over a small ODRL subset, their evaluation, and the
//! contract negotiation that binds an agreed policy to every transfer.
//!
//! Evaluation is default-deny with deny-overrides: a matching prohibition
//! always wins, otherwise any matching permission permits.

mod negotiation;

use serde::{Deserialize, Serialize};

use crate::identity::Did;

pub use negotiation::{
    authorize_use, conclude_agreement, next_state, ContractAgreement, EventKind, Negotiation,
    NegotiationState, Role, Transition, TranscriptEntry, UseLedger,
};

/// Upper bound on permissions plus prohibitions in one policy.
pub const MAX_RULES: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("policy has {0} rules, more than {MAX_RULES}")]
    TooManyRules(usize),
    #[error("operator {operator:?} not allowed on {dimension:?}")]
    IncompatibleOperator { dimension: Dimension, operator: Operator },
    #[error("value type does not fit dimension {0:?}")]
    WrongValueType(Dimension),
    #[error("{event:?} is not legal in state {from:?}")]
    IllegalTransition { from: NegotiationState, event: EventKind },
    #[error("actor may not fire this transition")]
    WrongActor,
    #[error("negotiation is in state {0:?}")]
    WrongState(NegotiationState),
    #[error("signature does not verify")]
    BadSignature,
    #[error("transcript entry does not fit negotiation: {0}")]
    TranscriptMismatch(&'static str),
    #[error("provider and consumer must differ")]
    SameParty,
    #[error("policy id {0:?} already used by this assigner")]
    DuplicatePolicyId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Use,
    Read,
    Distribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Dimension {
    /// Ticks since the agreement was concluded; may be negative.
    ElapsedTick,
    Purpose,
    /// Ordinal of the use being authorized: prior uses plus one.
    UseCount,
    Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Eq,
    Lteq,
    Gteq,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintValue {
    Integer(i64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub dimension: Dimension,
    pub operator: Operator,
    pub value: ConstraintValue,
}

impl Constraint {
    pub fn new(dimension: Dimension, operator: Operator, value: impl Into<ConstraintValue>) -> Result<Self, PolicyError> {
        let c = Self { dimension, operator, value: value.into() };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let numeric = matches!(self.dimension, Dimension::ElapsedTick | Dimension::UseCount);
        if !numeric && self.operator != Operator::Eq {
            return Err(PolicyError::IncompatibleOperator { dimension: self.dimension, operator: self.operator });
        }
        match (&self.value, numeric) {
            (ConstraintValue::Integer(_), true) | (ConstraintValue::Text(_), false) => Ok(()),
            _ => Err(PolicyError::WrongValueType(self.dimension)),
        }
    }

    fn satisfied(&self, ctx: &UsageContext, elapsed: i64) -> bool {
        match (&self.value, self.dimension) {
            (ConstraintValue::Integer(v), Dimension::ElapsedTick) => compare(elapsed, self.operator, *v),
            (ConstraintValue::Integer(v), Dimension::UseCount) => {
                let ordinal = i64::try_from(ctx.prior_use_count).unwrap_or(i64::MAX).saturating_add(1);
                compare(ordinal, self.operator, *v)
            }
            (ConstraintValue::Text(v), Dimension::Purpose) => self.operator == Operator::Eq && &ctx.purpose == v,
            (ConstraintValue::Text(v), Dimension::Region) => self.operator == Operator::Eq && &ctx.region == v,
            _ => false,
        }
    }
}

fn compare(lhs: i64, op: Operator, rhs: i64) -> bool {
    match op {
        Operator::Eq => lhs == rhs,
        Operator::Lteq => lhs <= rhs,
        Operator::Gteq => lhs >= rhs,
    }
}

impl From<i64> for ConstraintValue {
    fn from(v: i64) -> Self {
        ConstraintValue::Integer(v)
    }
}

impl From<&str> for ConstraintValue {
    fn from(v: &str) -> Self {
        ConstraintValue::Text(v.to_owned())
    }
}

/// An action plus conjunctive constraints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub action: Action,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

impl Rule {
    pub fn new(action: Action, constraints: Vec<Constraint>) -> Self {
        Self { action, constraints }
    }

    pub fn matches(&self, ctx: &UsageContext, elapsed: i64) -> bool {
        self.action == ctx.action && self.constraints.iter().all(|c| c.satisfied(ctx, elapsed))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UsagePolicy {
    pub policy_id: String,
    pub assigner: Did,
    #[serde(default)]
    pub permissions: Vec<Rule>,
    #[serde(default)]
    pub prohibitions: Vec<Rule>,
}

impl UsagePolicy {
    pub fn empty(policy_id: impl Into<String>, assigner: Did) -> Self {
        Self { policy_id: policy_id.into(), assigner, permissions: Vec::new(), prohibitions: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let n = self.permissions.len() + self.prohibitions.len();
        if n > MAX_RULES {
            return Err(PolicyError::TooManyRules(n));
        }
        self.permissions
            .iter()
            .chain(&self.prohibitions)
            .flat_map(|r| &r.constraints)
            .try_for_each(Constraint::validate)
    }
}

/// The facts a usage decision is made over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UsageContext {
    pub action: Action,
    pub purpose: String,
    pub tick: u64,
    pub region: String,
    pub prior_use_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Permit,
    Deny,
}

/// Evaluates with elapsed time measured from tick 0.
pub fn evaluate(policy: &UsagePolicy, ctx: &UsageContext) -> Decision {
    evaluate_since(policy, ctx, 0)
}

/// Evaluates with `elapsedTick` constraints measured from `origin`,
/// normally the agreement tick.
pub fn evaluate_since(policy: &UsagePolicy, ctx: &UsageContext, origin: u64) -> Decision {
    let elapsed = ctx.tick as i64 - origin as i64;
    if policy.prohibitions.iter().any(|r| r.matches(ctx, elapsed)) {
        Decision::Deny
    } else if policy.permissions.iter().any(|r| r.matches(ctx, elapsed)) {
        Decision::Permit
    } else {
        Decision::Deny
    }
}
