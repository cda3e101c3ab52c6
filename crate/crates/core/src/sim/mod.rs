//! Deterministic discrete-event simulator.
//!
//! A [`Scenario`] names organizations, network behaviour and a schedule of
//! directives. [`run`] advances logical ticks: scheduled directives fire
//! first, then messages whose delay has elapsed are delivered and agents are
//! stepped in label order until the tick is quiescent. Loss is drawn from a
//! ChaCha8 stream seeded by the scenario, so equal seeds give byte-equal
//! traces, logs and reports.

mod oracle;
mod output;
mod run;
mod scenario;

pub use oracle::{convergence_oracle, view_matches, Expected, ExpectedRecord, Subscription};
pub use output::{summary_table, write_outputs};
pub use run::{
    run, ConvergenceEntry, CredentialFact, DirectiveError, Metrics, RunOutcome, RunReport, SimError, TamperOutcome,
    TraceEvent, TraceRecord, UseRecord, VerificationSummary,
};
pub use scenario::{
    load_scenario, parse_scenario, Directive, LoadError, Network, OrgSpec, PolicySpec, RoleHint, Scenario,
    ScenarioError, ScheduleEntry, TamperTarget,
};
