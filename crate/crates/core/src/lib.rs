//! Decentralized master data management over self-sovereign identity.
//!
//! Master data records travel between sovereign organizations as signed,
//! revocable, selectively disclosable credentials. Usage is governed by
//! machine-readable policies agreed through contract negotiation, and every
//! exchange lands in a content-blind Merkle audit log.
//!
//! | module | role |
//! |---|---|
//! | [`crypto`] | canonical form, SHA-256, Ed25519 |
//! | [`identity`] | `did:mdm` identifiers, resolver, trust registry |
//! | [`credential`] | schemas, issuance, selective disclosure, status lists, verification |
//! | [`policy`] | usage policies, negotiation state machine, agreements |
//! | [`audit`] | Merkle audit log with inclusion and consistency proofs |
//! | [`mdm`] | golden-record store with attribute-level merge |
//! | [`dataspace`] | catalog, wire messages, participant agents |
//! | [`sim`] | deterministic multi-party simulator |
//! | [`cli`] | the `mdm` command line |

pub mod audit;
pub mod cli;
pub mod credential;
pub mod dataspace;
pub mod crypto;
pub mod identity;
pub mod mdm;
pub mod policy;
pub mod sim;
