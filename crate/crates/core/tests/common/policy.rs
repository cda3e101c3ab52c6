//! Truth-table side of the policy checks: a fixed alphabet of rule bodies,
//! a 200-point context grid and a hand-rolled evaluator over both.

use sovereign_mdm::identity::Did;
use sovereign_mdm::policy::{Action, Constraint, Dimension, Operator, Rule, UsageContext, UsagePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cons {
    Elapsed(Cmp, i64),
    Uses(Cmp, i64),
    Purpose(&'static str),
    Region(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Body {
    pub action: u8,
    pub cons: Vec<Cons>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ctx {
    pub action: u8,
    pub purpose: &'static str,
    pub region: &'static str,
    pub elapsed: i64,
    pub prior: u64,
}

pub const ORIGIN: u64 = 20;

fn cmp(l: i64, c: Cmp, r: i64) -> bool {
    match c {
        Cmp::Eq => l == r,
        Cmp::Le => l <= r,
        Cmp::Ge => l >= r,
    }
}

pub fn holds(b: &Body, x: &Ctx) -> bool {
    if b.action != x.action {
        return false;
    }
    b.cons.iter().all(|c| match *c {
        Cons::Elapsed(o, v) => cmp(x.elapsed, o, v),
        Cons::Uses(o, v) => cmp(x.prior as i64 + 1, o, v),
        Cons::Purpose(p) => x.purpose == p,
        Cons::Region(r) => x.region == r,
    })
}

/// Deny if any prohibition holds, Permit if any permission holds, else Deny.
pub fn decide(perms: &[&Body], prohibs: &[&Body], x: &Ctx) -> bool {
    if prohibs.iter().any(|b| holds(b, x)) {
        return false;
    }
    perms.iter().any(|b| holds(b, x))
}

const CONSTRAINT_SETS: [&[Cons]; 16] = [
    &[],
    &[Cons::Elapsed(Cmp::Le, 5)],
    &[Cons::Elapsed(Cmp::Ge, 5)],
    &[Cons::Elapsed(Cmp::Eq, 7)],
    &[Cons::Elapsed(Cmp::Le, -1)],
    &[Cons::Uses(Cmp::Le, 2)],
    &[Cons::Uses(Cmp::Ge, 3)],
    &[Cons::Uses(Cmp::Eq, 1)],
    &[Cons::Purpose("procurement")],
    &[Cons::Purpose("marketing")],
    &[Cons::Region("EU")],
    &[Cons::Region("US")],
    &[Cons::Purpose("procurement"), Cons::Elapsed(Cmp::Le, 7)],
    &[Cons::Region("EU"), Cons::Uses(Cmp::Le, 2)],
    &[Cons::Purpose("marketing"), Cons::Region("US")],
    &[Cons::Elapsed(Cmp::Ge, 0), Cons::Uses(Cmp::Ge, 2), Cons::Region("EU")],
];

/// 3 actions by 16 constraint sets.
pub fn bodies() -> Vec<Body> {
    (0..3u8)
        .flat_map(|a| CONSTRAINT_SETS.iter().map(move |c| Body { action: a, cons: c.to_vec() }))
        .collect()
}

/// 2 actions x 2 purposes x 2 regions x 5 elapsed values x 5 use counts.
pub fn contexts() -> Vec<Ctx> {
    let mut out = Vec::new();
    for action in [0u8, 2] {
        for purpose in ["procurement", "marketing"] {
            for region in ["EU", "US"] {
                for elapsed in [-2i64, 0, 5, 7, 11] {
                    for prior in [0u64, 1, 2, 3, 6] {
                        out.push(Ctx { action, purpose, region, elapsed, prior });
                    }
                }
            }
        }
    }
    out
}

fn action(a: u8) -> Action {
    [Action::Use, Action::Read, Action::Distribute][a as usize]
}

fn operator(c: Cmp) -> Operator {
    match c {
        Cmp::Eq => Operator::Eq,
        Cmp::Le => Operator::Lteq,
        Cmp::Ge => Operator::Gteq,
    }
}

pub fn to_rule(b: &Body) -> Rule {
    let constraints = b
        .cons
        .iter()
        .map(|c| match *c {
            Cons::Elapsed(o, v) => Constraint::new(Dimension::ElapsedTick, operator(o), v),
            Cons::Uses(o, v) => Constraint::new(Dimension::UseCount, operator(o), v),
            Cons::Purpose(p) => Constraint::new(Dimension::Purpose, Operator::Eq, p),
            Cons::Region(r) => Constraint::new(Dimension::Region, Operator::Eq, r),
        })
        .collect::<Result<Vec<_>, _>>()
        .unwrap();
    Rule::new(action(b.action), constraints)
}

pub fn to_policy(perms: &[&Body], prohibs: &[&Body]) -> UsagePolicy {
    let mut p = UsagePolicy::empty("pol-oracle", Did::from_public_key(&[0; 32]));
    p.permissions = perms.iter().map(|b| to_rule(b)).collect();
    p.prohibitions = prohibs.iter().map(|b| to_rule(b)).collect();
    p
}

pub fn to_context(x: &Ctx) -> UsageContext {
    UsageContext {
        action: action(x.action),
        purpose: x.purpose.to_owned(),
        tick: (ORIGIN as i64 + x.elapsed) as u64,
        region: x.region.to_owned(),
        prior_use_count: x.prior,
    }
}

/// 200 contexts as a bitset.
type Mask = [u64; 4];

fn mask_of(b: &Body, grid: &[Ctx]) -> Mask {
    let mut m = [0u64; 4];
    for (i, x) in grid.iter().enumerate() {
        if holds(b, x) {
            m[i / 64] |= 1 << (i % 64);
        }
    }
    m
}

/// Library `evaluate_since` against the reference decision on every
/// policy of at most three rules drawn (with repetition) from the 96
/// permission/prohibition atoms, over the whole grid. Returns the number
/// of (policy, context) pairs compared.
pub fn exhaustive_check() -> Result<u64, String> {
    use sovereign_mdm::policy::{evaluate_since, Decision};
    let bodies = bodies();
    let grid = contexts();
    let lib_ctx: Vec<UsageContext> = grid.iter().map(to_context).collect();
    let masks: Vec<Mask> = bodies.iter().map(|b| mask_of(b, &grid)).collect();
    // atom a < 48 is a permission over body a, otherwise a prohibition over body a - 48
    let atoms = 2 * bodies.len();
    let mut compared = 0u64;
    let mut check = |chosen: &[usize]| -> Result<(), String> {
        let perms: Vec<&Body> = chosen.iter().filter(|a| **a < bodies.len()).map(|a| &bodies[*a]).collect();
        let prohibs: Vec<&Body> =
            chosen.iter().filter(|a| **a >= bodies.len()).map(|a| &bodies[*a - bodies.len()]).collect();
        let mut permit = [0u64; 4];
        let mut deny = [0u64; 4];
        for a in chosen {
            let (target, m) = if *a < bodies.len() { (&mut permit, &masks[*a]) } else { (&mut deny, &masks[*a - bodies.len()]) };
            for w in 0..4 {
                target[w] |= m[w];
            }
        }
        let policy = to_policy(&perms, &prohibs);
        for (i, ctx) in lib_ctx.iter().enumerate() {
            let want = permit[i / 64] & !deny[i / 64] & (1 << (i % 64)) != 0;
            debug_assert_eq!(want, decide(&perms, &prohibs, &grid[i]));
            let got = evaluate_since(&policy, ctx, ORIGIN) == Decision::Permit;
            if got != want {
                return Err(format!("policy {chosen:?} context {:?}: library {got}, reference {want}", grid[i]));
            }
            compared += 1;
        }
        Ok(())
    };
    check(&[])?;
    for i in 0..atoms {
        check(&[i])?;
        for j in i..atoms {
            check(&[i, j])?;
            for k in j..atoms {
                check(&[i, j, k])?;
            }
        }
    }
    Ok(compared)
}

/// Random policies of up to `MAX_RULES` rules with random contexts: checks
/// agreement with the reference plus default-deny and deny-overrides
/// directly. Returns the number of evaluations.
pub fn random_check(seed: u64, policies: usize) -> Result<u64, String> {
    use rand::{Rng, SeedableRng};
    use sovereign_mdm::policy::{evaluate_since, Decision, MAX_RULES};
    let bodies = bodies();
    let grid = contexts();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut n = 0u64;
    for p in 0..policies {
        let count = rng.random_range(0..=MAX_RULES);
        let mut perms = Vec::new();
        let mut prohibs = Vec::new();
        for _ in 0..count {
            let b = &bodies[rng.random_range(0..bodies.len())];
            if rng.random_bool(0.5) {
                perms.push(b);
            } else {
                prohibs.push(b);
            }
        }
        let policy = to_policy(&perms, &prohibs);
        for _ in 0..20 {
            let x = &grid[rng.random_range(0..grid.len())];
            let got = evaluate_since(&policy, &to_context(x), ORIGIN);
            let any_prohibition = prohibs.iter().any(|b| holds(b, x));
            let any_permission = perms.iter().any(|b| holds(b, x));
            if any_prohibition && got != Decision::Deny {
                return Err(format!("policy {p}: matching prohibition did not deny at {x:?}"));
            }
            if !any_permission && got != Decision::Deny {
                return Err(format!("policy {p}: permitted with no matching permission at {x:?}"));
            }
            if (got == Decision::Permit) != decide(&perms, &prohibs, x) {
                return Err(format!("policy {p}: disagrees with reference at {x:?}"));
            }
            n += 1;
        }
    }
    Ok(n)
}
