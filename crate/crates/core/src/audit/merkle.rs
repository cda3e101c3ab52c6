//! RFC 6962 style Merkle tree: leaves hashed as `H(0x00 || data)`, interior
//! nodes as `H(0x01 || left || right)`, split at the largest power of two
//! strictly below the subtree size.

use serde::{Deserialize, Serialize};

use super::AuditError;
use crate::crypto::{sha256_raw, Digest};

pub type Hash = [u8; 32];

pub fn leaf_hash(data: &[u8]) -> Hash {
    let mut buf = Vec::with_capacity(data.len() + 1);
    buf.push(0x00);
    buf.extend_from_slice(data);
    sha256_raw(&buf)
}

pub fn node_hash(left: &Hash, right: &Hash) -> Hash {
    let mut buf = [0u8; 65];
    buf[0] = 0x01;
    buf[1..33].copy_from_slice(left);
    buf[33..].copy_from_slice(right);
    sha256_raw(&buf)
}

/// Largest power of two strictly less than `n` (n >= 2).
fn split(n: usize) -> usize {
    debug_assert!(n >= 2);
    1 << (usize::BITS - 1 - (n - 1).leading_zeros())
}

/// Root over a slice of leaf hashes; the empty tree hashes to `H("")`.
pub fn subtree_root(leaves: &[Hash]) -> Hash {
    match leaves.len() {
        0 => sha256_raw(b""),
        1 => leaves[0],
        n => {
            let k = split(n);
            node_hash(&subtree_root(&leaves[..k]), &subtree_root(&leaves[k..]))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InclusionProof {
    pub leaf_index: u64,
    pub tree_size: u64,
    pub path: Vec<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConsistencyProof {
    pub old_size: u64,
    pub new_size: u64,
    pub nodes: Vec<Digest>,
}

/// Append-only sequence of leaf hashes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditTree {
    leaves: Vec<Digest>,
}

impl AuditTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_leaf_hashes(leaves: impl IntoIterator<Item = Hash>) -> Self {
        Self { leaves: leaves.into_iter().map(Digest::from_bytes).collect() }
    }

    pub fn size(&self) -> u64 {
        self.leaves.len() as u64
    }

    pub fn leaves(&self) -> &[Digest] {
        &self.leaves
    }

    /// Appends raw leaf data and returns its index.
    pub fn push(&mut self, data: &[u8]) -> u64 {
        self.leaves.push(Digest::from_bytes(leaf_hash(data)));
        self.size() - 1
    }

    fn hashes(&self) -> Vec<Hash> {
        self.leaves.iter().map(Digest::to_bytes).collect()
    }

    pub fn root(&self) -> Digest {
        Digest::from_bytes(subtree_root(&self.hashes()))
    }

    /// Root of the first `size` leaves.
    pub fn root_at(&self, size: u64) -> Result<Digest, AuditError> {
        if size > self.size() {
            return Err(AuditError::SizeOutOfRange { old: size, size: self.size() });
        }
        Ok(Digest::from_bytes(subtree_root(&self.hashes()[..size as usize])))
    }

    pub fn prove_inclusion(&self, leaf_index: u64) -> Result<InclusionProof, AuditError> {
        if leaf_index >= self.size() {
            return Err(AuditError::IndexOutOfRange { index: leaf_index, size: self.size() });
        }
        let mut path = Vec::new();
        audit_path(leaf_index as usize, &self.hashes(), &mut path);
        Ok(InclusionProof {
            leaf_index,
            tree_size: self.size(),
            path: path.into_iter().map(Digest::from_bytes).collect(),
        })
    }

    pub fn prove_consistency(&self, old_size: u64) -> Result<ConsistencyProof, AuditError> {
        if old_size == 0 || old_size > self.size() {
            return Err(AuditError::SizeOutOfRange { old: old_size, size: self.size() });
        }
        let mut nodes = Vec::new();
        if old_size < self.size() {
            subproof(old_size as usize, &self.hashes(), true, &mut nodes);
        }
        Ok(ConsistencyProof {
            old_size,
            new_size: self.size(),
            nodes: nodes.into_iter().map(Digest::from_bytes).collect(),
        })
    }
}

// Sibling hashes from the leaf upward.
fn audit_path(m: usize, leaves: &[Hash], out: &mut Vec<Hash>) {
    let n = leaves.len();
    if n <= 1 {
        return;
    }
    let k = split(n);
    if m < k {
        audit_path(m, &leaves[..k], out);
        out.push(subtree_root(&leaves[k..]));
    } else {
        audit_path(m - k, &leaves[k..], out);
        out.push(subtree_root(&leaves[..k]));
    }
}

fn subproof(m: usize, leaves: &[Hash], complete: bool, out: &mut Vec<Hash>) {
    let n = leaves.len();
    if m == n {
        if !complete {
            out.push(subtree_root(leaves));
        }
        return;
    }
    let k = split(n);
    if m <= k {
        subproof(m, &leaves[..k], complete, out);
        out.push(subtree_root(&leaves[k..]));
    } else {
        subproof(m - k, &leaves[k..], false, out);
        out.push(subtree_root(&leaves[..k]));
    }
}

/// Iterative check that `leaf` sits at `proof.leaf_index` under `root`.
pub fn verify_inclusion(root: &Digest, leaf: &Digest, proof: &InclusionProof) -> bool {
    if proof.leaf_index >= proof.tree_size {
        return false;
    }
    let mut fnode = proof.leaf_index;
    let mut snode = proof.tree_size - 1;
    let mut r = leaf.to_bytes();
    for p in &proof.path {
        if snode == 0 {
            return false;
        }
        let p = p.to_bytes();
        if fnode & 1 == 1 || fnode == snode {
            r = node_hash(&p, &r);
            if fnode & 1 == 0 {
                while fnode & 1 == 0 && fnode != 0 {
                    fnode >>= 1;
                    snode >>= 1;
                }
            }
        } else {
            r = node_hash(&r, &p);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    snode == 0 && r == root.to_bytes()
}

/// Iterative check that `old_root` commits to a prefix of `new_root`.
pub fn verify_consistency(old_root: &Digest, new_root: &Digest, proof: &ConsistencyProof) -> bool {
    let (first, second) = (proof.old_size, proof.new_size);
    if first == 0 || first > second {
        return false;
    }
    if first == second {
        return proof.nodes.is_empty() && old_root == new_root;
    }
    if proof.nodes.is_empty() {
        return false;
    }
    let mut path: Vec<Hash> = proof.nodes.iter().map(Digest::to_bytes).collect();
    if first.is_power_of_two() {
        path.insert(0, old_root.to_bytes());
    }
    let mut fnode = first - 1;
    let mut snode = second - 1;
    while fnode & 1 == 1 {
        fnode >>= 1;
        snode >>= 1;
    }
    let mut fr = path[0];
    let mut sr = path[0];
    for c in &path[1..] {
        if snode == 0 {
            return false;
        }
        if fnode & 1 == 1 || fnode == snode {
            fr = node_hash(c, &fr);
            sr = node_hash(c, &sr);
            if fnode & 1 == 0 {
                while fnode & 1 == 0 && fnode != 0 {
                    fnode >>= 1;
                    snode >>= 1;
                }
            }
        } else {
            sr = node_hash(&sr, c);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    fr == old_root.to_bytes() && sr == new_root.to_bytes() && snode == 0
}
