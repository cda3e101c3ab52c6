use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{AttributeValue, CredentialError, MasterDataCredential};
use crate::crypto::{self, canonicalize, CanonicalBytes, Digest, KeyPair, Signature};
use crate::identity::{Did, Resolver};

/// A salted attribute opening: `sha256(canonical([salt, name, value]))` is
/// the digest listed in the credential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disclosure {
    pub salt: String,
    pub name: String,
    pub value: AttributeValue,
}

impl Disclosure {
    pub fn digest(&self) -> Digest {
        let triple = json!([self.salt, self.name, self.value]);
        crypto::sha256(canonicalize(&triple).expect("attribute values hold no floats").as_bytes())
    }

    pub fn salt_well_formed(&self) -> bool {
        self.salt.len() == 32 && self.salt.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Presentation {
    pub credential: MasterDataCredential,
    pub disclosed: Vec<Disclosure>,
    pub holder: Did,
    pub presented_at: u64,
    pub holder_signature: Signature,
}

impl Presentation {
    /// Bytes covered by the holder signature: credential id, the digests of
    /// the revealed disclosures, holder and presentation tick.
    pub fn holder_payload(&self) -> CanonicalBytes {
        let digests: Vec<Digest> = self.disclosed.iter().map(Disclosure::digest).collect();
        canonicalize(&json!({
            "credentialId": self.credential.credential_id,
            "digests": digests,
            "holder": self.holder,
            "presentedAt": self.presented_at,
        }))
        .expect("integers only")
    }

    pub fn verify_holder(&self, resolver: &Resolver) -> bool {
        self.holder == self.credential.subject
            && resolver.verify_by(&self.holder, &self.holder_payload(), &self.holder_signature)
    }

    /// Every attribute a verifier learns: plain claims plus disclosures.
    pub fn revealed(&self) -> impl Iterator<Item = (&str, &AttributeValue)> {
        self.credential
            .claims
            .attributes
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain(self.disclosed.iter().map(|d| (d.name.as_str(), &d.value)))
    }
}

/// Builds a presentation of `credential` revealing exactly `disclose`.
pub fn present(
    holder_key: &KeyPair,
    credential: &MasterDataCredential,
    wallet: &[Disclosure],
    disclose: &[&str],
    tick: u64,
) -> Result<Presentation, CredentialError> {
    let holder = Did::from_public_key(holder_key.public());
    if holder != credential.subject {
        return Err(CredentialError::NotHolder);
    }
    let mut disclosed: Vec<Disclosure> = Vec::new();
    for name in disclose {
        if disclosed.iter().any(|d| d.name == *name) {
            continue;
        }
        let d = wallet
            .iter()
            .find(|d| d.name == *name && credential.claims.digests.contains(&d.digest()))
            .ok_or_else(|| CredentialError::UnknownAttribute((*name).to_owned()))?;
        disclosed.push(d.clone());
    }
    let mut p = Presentation {
        credential: credential.clone(),
        disclosed,
        holder: holder.clone(),
        presented_at: tick,
        holder_signature: Signature { signer: String::new(), value: Vec::new() },
    };
    p.holder_signature = crypto::sign(holder_key, &holder.method_id(1), &p.holder_payload());
    Ok(p)
}
