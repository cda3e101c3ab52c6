//! Scenario files: organizations, network parameters and a tick-ordered
//! schedule of directives.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audit::EventType;
use crate::credential::{AttributeValue, CredentialSchema};
use crate::crypto;
use crate::policy::{Action, Rule};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("{}unknown organization label {label:?}", at(*.index))]
    UnknownLabel { index: Option<usize>, label: String },
    #[error("schedule entry {index}: tick {tick} precedes tick {previous} of the entry before it")]
    UnsortedSchedule { index: usize, tick: u64, previous: u64 },
    #[error("{context}: {message}")]
    InvalidParameter { context: String, message: String },
}

fn at(index: Option<usize>) -> String {
    index.map_or_else(|| "tiers: ".to_owned(), |i| format!("schedule entry {i}: "))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("scenario rejected: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct LoadError(pub Vec<ScenarioError>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RoleHint {
    Operator,
    Issuer,
    Holder,
    Consumer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OrgSpec {
    pub label: String,
    #[serde(default)]
    pub roles: Vec<RoleHint>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Network {
    #[serde(default)]
    pub delay_ticks: u64,
    #[serde(default)]
    pub loss_permille: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PolicySpec {
    pub policy_id: String,
    #[serde(default)]
    pub permissions: Vec<Rule>,
    #[serde(default)]
    pub prohibitions: Vec<Rule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TamperTarget {
    CredentialSignature,
    DisclosureValue,
    StatusListBit,
    AuditLeaf,
}

impl TamperTarget {
    pub const ALL: [TamperTarget; 4] = [
        TamperTarget::CredentialSignature,
        TamperTarget::DisclosureValue,
        TamperTarget::StatusListBit,
        TamperTarget::AuditLeaf,
    ];

    /// The check expected to catch this tampering.
    pub fn designated_check(self) -> &'static str {
        match self {
            TamperTarget::CredentialSignature => "signature",
            TamperTarget::DisclosureValue => "disclosuresConsistent",
            TamperTarget::StatusListBit => "statusMonotonicity",
            TamperTarget::AuditLeaf => "auditConsistency",
        }
    }
}

fn yes() -> bool {
    true
}

fn use_action() -> Action {
    Action::Use
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum Directive {
    CreateOrg {
        org: String,
    },
    RegisterTrust {
        issuer: String,
        schema_id: String,
        #[serde(default)]
        valid_from: u64,
        #[serde(default)]
        valid_until: Option<u64>,
    },
    DefineSchema {
        schema: CredentialSchema,
    },
    IssueCredential {
        issuer: String,
        holder: String,
        #[serde(rename = "ref")]
        reference: String,
        record_id: String,
        schema_id: String,
        attributes: BTreeMap<String, AttributeValue>,
        #[serde(default)]
        expires_at: Option<u64>,
        #[serde(default = "yes")]
        selective_disclosure: bool,
    },
    PublishAsset {
        provider: String,
        asset_id: String,
        schema_id: String,
        #[serde(default)]
        policy: Option<PolicySpec>,
        #[serde(default)]
        disclose: Vec<String>,
    },
    StartNegotiation {
        consumer: String,
        asset_id: String,
    },
    RequestTransfer {
        consumer: String,
        asset_id: String,
    },
    UseAsset {
        consumer: String,
        asset_id: String,
        #[serde(default = "use_action")]
        action: Action,
        purpose: String,
        region: String,
    },
    Revoke {
        issuer: String,
        #[serde(rename = "ref")]
        reference: String,
    },
    Supersede {
        issuer: String,
        #[serde(rename = "ref")]
        reference: String,
        new_ref: String,
        attributes: BTreeMap<String, AttributeValue>,
        #[serde(default)]
        expires_at: Option<u64>,
    },
    Verify {
        verifier: String,
        #[serde(rename = "ref")]
        reference: String,
    },
    Revalidate {
        org: String,
    },
    RepublishStatus {
        issuer: String,
    },
    InjectTamper {
        target: TamperTarget,
        #[serde(default)]
        leaf_index: Option<u64>,
    },
}

impl Directive {
    pub fn name(&self) -> &'static str {
        match self {
            Directive::CreateOrg { .. } => "createOrg",
            Directive::RegisterTrust { .. } => "registerTrust",
            Directive::DefineSchema { .. } => "defineSchema",
            Directive::IssueCredential { .. } => "issueCredential",
            Directive::PublishAsset { .. } => "publishAsset",
            Directive::StartNegotiation { .. } => "startNegotiation",
            Directive::RequestTransfer { .. } => "requestTransfer",
            Directive::UseAsset { .. } => "useAsset",
            Directive::Revoke { .. } => "revoke",
            Directive::Supersede { .. } => "supersede",
            Directive::Verify { .. } => "verify",
            Directive::Revalidate { .. } => "revalidate",
            Directive::RepublishStatus { .. } => "republishStatus",
            Directive::InjectTamper { .. } => "injectTamper",
        }
    }

    /// Organization labels this directive names.
    pub fn labels(&self) -> Vec<&str> {
        match self {
            Directive::CreateOrg { org } | Directive::Revalidate { org } => vec![org],
            Directive::RegisterTrust { issuer, .. }
            | Directive::Revoke { issuer, .. }
            | Directive::Supersede { issuer, .. }
            | Directive::RepublishStatus { issuer } => vec![issuer],
            Directive::IssueCredential { issuer, holder, .. } => vec![issuer, holder],
            Directive::PublishAsset { provider, .. } => vec![provider],
            Directive::StartNegotiation { consumer, .. }
            | Directive::RequestTransfer { consumer, .. }
            | Directive::UseAsset { consumer, .. } => vec![consumer],
            Directive::Verify { verifier, .. } => vec![verifier],
            Directive::DefineSchema { .. } | Directive::InjectTamper { .. } => vec![],
        }
    }

    /// The audit event type the directive's single audit record carries.
    /// Tampering is adversarial and leaves no honest record.
    pub fn event_type(&self) -> Option<EventType> {
        Some(match self {
            Directive::CreateOrg { .. } => EventType::Onboarded,
            Directive::RegisterTrust { .. } | Directive::DefineSchema { .. } => EventType::GovernanceUpdated,
            Directive::IssueCredential { .. } => EventType::Issued,
            Directive::PublishAsset { .. } => EventType::AssetPublished,
            Directive::StartNegotiation { .. } => EventType::NegotiationTransition,
            Directive::RequestTransfer { .. } => EventType::TransferRequested,
            Directive::UseAsset { .. } => EventType::UseAuthorized,
            Directive::Revoke { .. } => EventType::Revoked,
            Directive::Supersede { .. } => EventType::Superseded,
            Directive::Verify { .. } | Directive::Revalidate { .. } => EventType::Verified,
            Directive::RepublishStatus { .. } => EventType::StatusPublished,
            Directive::InjectTamper { .. } => return None,
        })
    }

    /// Directives after which stores are expected to settle again.
    pub fn is_lifecycle(&self) -> bool {
        matches!(
            self,
            Directive::IssueCredential { .. }
                | Directive::Supersede { .. }
                | Directive::Revoke { .. }
                | Directive::RegisterTrust { .. }
                | Directive::RequestTransfer { .. }
                | Directive::RepublishStatus { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScheduleEntry {
    pub tick: u64,
    pub directive: Directive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub ticks: u64,
    #[serde(default)]
    pub network: Network,
    pub organizations: Vec<OrgSpec>,
    #[serde(default)]
    pub tiers: BTreeMap<String, u32>,
    #[serde(default)]
    pub default_tier: u32,
    #[serde(default)]
    pub schedule: Vec<ScheduleEntry>,
}

impl Scenario {
    pub fn org(&self, label: &str) -> Option<&OrgSpec> {
        self.organizations.iter().find(|o| o.label == label)
    }

    pub fn has_role(&self, label: &str, role: RoleHint) -> bool {
        self.org(label).is_some_and(|o| o.roles.contains(&role))
    }

    /// The registry operator and catalog host: the first declared operator.
    pub fn operator(&self) -> Option<&str> {
        self.organizations
            .iter()
            .find(|o| o.roles.contains(&RoleHint::Operator))
            .map(|o| o.label.as_str())
    }

    pub fn validate(&self) -> Result<(), LoadError> {
        let mut errors = Vec::new();
        let mut labels = BTreeSet::new();
        for o in &self.organizations {
            if !labels.insert(o.label.as_str()) {
                errors.push(ScenarioError::InvalidParameter {
                    context: "organizations".into(),
                    message: format!("duplicate label {:?}", o.label),
                });
            }
        }
        if self.network.loss_permille > 1000 {
            errors.push(ScenarioError::InvalidParameter {
                context: "network".into(),
                message: format!("lossPermille {} exceeds 1000", self.network.loss_permille),
            });
        }
        for label in self.tiers.keys() {
            if !labels.contains(label.as_str()) {
                errors.push(ScenarioError::UnknownLabel { index: None, label: label.clone() });
            }
        }
        let mut previous = 0;
        for (index, entry) in self.schedule.iter().enumerate() {
            if entry.tick < previous {
                errors.push(ScenarioError::UnsortedSchedule { index, tick: entry.tick, previous });
            }
            previous = previous.max(entry.tick);
            if entry.tick >= self.ticks {
                errors.push(ScenarioError::InvalidParameter {
                    context: format!("schedule entry {index}"),
                    message: format!("tick {} is outside the run of {} ticks", entry.tick, self.ticks),
                });
            }
            for label in entry.directive.labels() {
                if !labels.contains(label) {
                    errors.push(ScenarioError::UnknownLabel { index: Some(index), label: label.to_owned() });
                }
            }
            if let Err(message) = check_parameters(&entry.directive) {
                errors.push(ScenarioError::InvalidParameter { context: format!("schedule entry {index}"), message });
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(LoadError(errors))
        }
    }
}

fn check_parameters(d: &Directive) -> Result<(), String> {
    match d {
        Directive::DefineSchema { schema } => schema.validate().map_err(|e| e.to_string()),
        Directive::PublishAsset { policy: Some(p), .. } => p
            .permissions
            .iter()
            .chain(&p.prohibitions)
            .flat_map(|r| &r.constraints)
            .try_for_each(|c| c.validate())
            .map_err(|e| e.to_string()),
        Directive::RegisterTrust { valid_from, valid_until: Some(until), .. } if until < valid_from => {
            Err("validUntil precedes validFrom".into())
        }
        _ => Ok(()),
    }
}

/// Parses and validates scenario text. Floats and duplicate keys are
/// rejected along with anything the schema does not describe.
pub fn parse_scenario(text: &str) -> Result<Scenario, LoadError> {
    let value = crypto::parse(text.as_bytes()).map_err(|e| LoadError(vec![ScenarioError::ParseError(e.to_string())]))?;
    let scenario: Scenario =
        serde_json::from_value(value).map_err(|e| LoadError(vec![ScenarioError::ParseError(e.to_string())]))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LoadError(vec![ScenarioError::ParseError(format!("{}: {e}", path.display()))]))?;
    parse_scenario(&text)
}
