use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    String,
    Integer,
    Boolean,
}

/// A single master-data attribute value. Floats are not representable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Boolean(bool),
    Integer(i64),
    String(String),
}

impl AttributeValue {
    pub fn kind(&self) -> AttributeKind {
        match self {
            AttributeValue::Boolean(_) => AttributeKind::Boolean,
            AttributeValue::Integer(_) => AttributeKind::Integer,
            AttributeValue::String(_) => AttributeKind::String,
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Boolean(b) => write!(f, "{b}"),
            AttributeValue::Integer(i) => write!(f, "{i}"),
            AttributeValue::String(s) => f.write_str(s),
        }
    }
}

impl From<&str> for AttributeValue {
    fn from(s: &str) -> Self {
        AttributeValue::String(s.to_owned())
    }
}

impl From<i64> for AttributeValue {
    fn from(i: i64) -> Self {
        AttributeValue::Integer(i)
    }
}

impl From<bool> for AttributeValue {
    fn from(b: bool) -> Self {
        AttributeValue::Boolean(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    pub required: bool,
    pub disclosable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("attribute {0:?} declared twice")]
    DuplicateAttribute(String),
    #[error("schema {0:?} has no required attribute")]
    NoRequiredAttribute(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CredentialSchema {
    pub schema_id: String,
    pub attributes: Vec<AttributeSpec>,
}

pub const BUSINESS_PARTNER_V1: &str = "mdm:business-partner:v1";

impl CredentialSchema {
    pub fn new(schema_id: impl Into<String>, attributes: Vec<AttributeSpec>) -> Result<Self, SchemaError> {
        let schema = Self { schema_id: schema_id.into(), attributes };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut seen = BTreeSet::new();
        for a in &self.attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(SchemaError::DuplicateAttribute(a.name.clone()));
            }
        }
        if !self.attributes.iter().any(|a| a.required) {
            return Err(SchemaError::NoRequiredAttribute(self.schema_id.clone()));
        }
        Ok(())
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.name == name)
    }

    /// Illustrative business-partner schema: legal name, address, bank
    /// account and contact person.
    pub fn business_partner() -> Self {
        let attr = |name: &str, required| AttributeSpec {
            name: name.into(),
            kind: AttributeKind::String,
            required,
            disclosable: true,
        };
        Self {
            schema_id: BUSINESS_PARTNER_V1.into(),
            attributes: vec![
                attr("legalName", true),
                attr("address", true),
                attr("bankAccount", false),
                attr("contactPerson", false),
            ],
        }
    }
}

/// Dataspace-wide schema map, fixed once the dataspace starts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaRegistry {
    schemas: BTreeMap<String, CredentialSchema>,
}

impl SchemaRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, schema: CredentialSchema) -> Result<(), SchemaError> {
        schema.validate()?;
        self.schemas.insert(schema.schema_id.clone(), schema);
        Ok(())
    }

    pub fn get(&self, schema_id: &str) -> Option<&CredentialSchema> {
        self.schemas.get(schema_id)
    }

    pub fn contains(&self, schema_id: &str) -> bool {
        self.schemas.contains_key(schema_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CredentialSchema> {
        self.schemas.values()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MasterDataRecord {
    pub record_id: String,
    pub attributes: BTreeMap<String, AttributeValue>,
}

impl MasterDataRecord {
    pub fn new<K, V>(record_id: impl Into<String>, attributes: impl IntoIterator<Item = (K, V)>) -> Self
    where
        K: Into<String>,
        V: Into<AttributeValue>,
    {
        Self {
            record_id: record_id.into(),
            attributes: attributes.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ViolationReason {
    Missing,
    WrongKind,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub attribute: String,
    pub reason: ViolationReason,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}", self.attribute, self.reason)
    }
}

/// Every way `record` fails to conform to `schema`; empty iff conformant.
pub fn validate_against_schema(record: &MasterDataRecord, schema: &CredentialSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    for spec in &schema.attributes {
        match record.attributes.get(&spec.name) {
            None if spec.required => {
                out.push(Violation { attribute: spec.name.clone(), reason: ViolationReason::Missing })
            }
            Some(v) if v.kind() != spec.kind => {
                out.push(Violation { attribute: spec.name.clone(), reason: ViolationReason::WrongKind })
            }
            _ => {}
        }
    }
    for name in record.attributes.keys() {
        if schema.attribute(name).is_none() {
            out.push(Violation { attribute: name.clone(), reason: ViolationReason::Unknown });
        }
    }
    out
}
