//! Transition table of the negotiation automaton, transcribed by hand.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S {
    Requested,
    Offered,
    Accepted,
    Agreed,
    Finalized,
    Terminated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum E {
    Offer,
    Accept,
    Agree,
    Finalize,
    Terminate,
}

pub const EVENTS: [E; 5] = [E::Offer, E::Accept, E::Agree, E::Finalize, E::Terminate];

/// `Some(next)` when `provider_acts`-side may fire `e` in `s`.
pub fn step(s: S, e: E, provider_acts: bool) -> Option<S> {
    let table: &[(S, E, Option<bool>, S)] = &[
        (S::Requested, E::Offer, Some(true), S::Offered),
        (S::Offered, E::Accept, Some(false), S::Accepted),
        (S::Accepted, E::Agree, Some(true), S::Agreed),
        (S::Agreed, E::Finalize, None, S::Finalized),
        (S::Requested, E::Terminate, None, S::Terminated),
        (S::Offered, E::Terminate, None, S::Terminated),
        (S::Accepted, E::Terminate, None, S::Terminated),
        (S::Agreed, E::Terminate, None, S::Terminated),
    ];
    table
        .iter()
        .find(|(from, ev, who, _)| *from == s && *ev == e && who.is_none_or(|p| p == provider_acts))
        .map(|row| row.3)
}

use sovereign_mdm::identity::{create_organization, Resolver};
use sovereign_mdm::policy::{next_state, EventKind, Negotiation, NegotiationState, Role, Transition, UsagePolicy};

fn lib_state(s: S) -> NegotiationState {
    match s {
        S::Requested => NegotiationState::Requested,
        S::Offered => NegotiationState::Offered,
        S::Accepted => NegotiationState::Accepted,
        S::Agreed => NegotiationState::Agreed,
        S::Finalized => NegotiationState::Finalized,
        S::Terminated => NegotiationState::Terminated,
    }
}

fn lib_event(e: E) -> EventKind {
    match e {
        E::Offer => EventKind::Offer,
        E::Accept => EventKind::Accept,
        E::Agree => EventKind::Agree,
        E::Finalize => EventKind::Finalize,
        E::Terminate => EventKind::Terminate,
    }
}

const HAPPY: [S; 4] = [S::Offered, S::Accepted, S::Agreed, S::Finalized];

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Census {
    pub strings: u64,
    pub finalized: u64,
}

/// Every string of (event, actor) symbols up to `max_len`, run through
/// the library table with rejected events leaving the state unchanged.
/// Fails on any disagreement with the reference table or on reaching
/// FINALIZED by any accepted path other than the happy one.
pub fn enumerate_table(max_len: usize) -> Result<Census, String> {
    fn go(s: S, path: &mut Vec<S>, depth: usize, max: usize, c: &mut Census) -> Result<(), String> {
        c.strings += 1;
        if s == S::Finalized {
            c.finalized += 1;
        }
        if depth == max {
            return Ok(());
        }
        for e in EVENTS {
            for provider in [true, false] {
                let role = if provider { Role::Provider } else { Role::Consumer };
                let lib = next_state(lib_state(s), lib_event(e), role).ok();
                let want = step(s, e, provider);
                if lib != want.map(lib_state) {
                    return Err(format!("{s:?} --{e:?}/{role:?}--> library {lib:?}, reference {want:?}"));
                }
                match want {
                    Some(next) => {
                        path.push(next);
                        if next == S::Finalized && path[..] != HAPPY {
                            return Err(format!("FINALIZED via {path:?}"));
                        }
                        go(next, path, depth + 1, max, c)?;
                        path.pop();
                    }
                    None => go(s, path, depth + 1, max, c)?,
                }
            }
        }
        Ok(())
    }
    let mut c = Census::default();
    go(S::Requested, &mut Vec::new(), 0, max_len, &mut c)?;
    Ok(c)
}

/// The same walk on real signed negotiations. A rejected transition cannot
/// change the negotiation (it is taken by reference), so only accepted
/// prefixes are expanded. Returns the number of distinct accepted
/// transcripts and how many of them end FINALIZED.
pub fn enumerate_signed(max_len: usize) -> Result<Census, String> {
    let mut resolver = Resolver::new();
    let provider = create_organization(&mut resolver, [21; 32], 0).unwrap();
    let consumer = create_organization(&mut resolver, [22; 32], 0).unwrap();
    let policy = UsagePolicy::empty("pol-x", provider.did.clone());
    let root = Negotiation::request("neg-x", provider.did.clone(), consumer.did.clone(), "asset-x").unwrap();

    let mut c = Census::default();
    let mut stack = vec![(root, 0usize)];
    while let Some((neg, depth)) = stack.pop() {
        c.strings += 1;
        if !neg.verify_transcript(&resolver) {
            return Err(format!("transcript of {:?} does not verify", neg.state));
        }
        let finalized = neg.state == NegotiationState::Finalized;
        if finalized {
            c.finalized += 1;
        }
        if finalized != neg.passed_through_agreement() {
            return Err(format!("state {:?} with transcript path {:?}", neg.state, neg.transcript.iter().map(|e| e.to).collect::<Vec<_>>()));
        }
        if depth == max_len {
            continue;
        }
        for e in EVENTS {
            for org in [&provider, &consumer] {
                let t = match e {
                    E::Offer => Transition::Offer(policy.clone()),
                    E::Accept => Transition::Accept,
                    E::Agree => Transition::Agree,
                    E::Finalize => Transition::Finalize,
                    E::Terminate => Transition::Terminate,
                };
                if let Ok(next) = neg.transition(t, &org.keys, depth as u64) {
                    stack.push((next, depth + 1));
                }
            }
        }
    }
    Ok(c)
}
