//! Library-versus-oracle checks shared by the conformance tests and the
//! acceptance harness.

use sovereign_mdm::audit::{leaf_hash, verify_consistency, verify_inclusion, AuditTree};
use sovereign_mdm::crypto::{sha256, sign_raw, verify_raw, Digest, KeyPair};

use super::{merkle as oracle, vectors};

fn tree(d: &[Vec<u8>]) -> AuditTree {
    let mut t = AuditTree::new();
    for x in d {
        t.push(x);
    }
    t
}

fn digests(hs: Vec<oracle::H>) -> Vec<Digest> {
    hs.into_iter().map(Digest::from_bytes).collect()
}

/// Roots, inclusion paths and consistency proofs for every size up to
/// `max_n`, every leaf and every prefix, plus detection of every single-leaf
/// mutation. Returns the number of comparisons made.
pub fn merkle_equivalence(max_n: usize) -> Result<u64, String> {
    let mut n_checks = 0u64;
    for n in 0..=max_n {
        let d: Vec<Vec<u8>> = (0..n).map(|i| vec![0x5a, i as u8, (i * 13) as u8]).collect();
        let t = tree(&d);
        if t.root().to_bytes() != oracle::mth(&d) {
            return Err(format!("root differs at n={n}"));
        }
        n_checks += 1;
        for m in 0..n {
            let p = t.prove_inclusion(m as u64).map_err(|e| e.to_string())?;
            if p.path != digests(oracle::path(m, &d)) || !verify_inclusion(&t.root(), &Digest::from_bytes(oracle::leaf(&d[m])), &p) {
                return Err(format!("inclusion differs at n={n} m={m}"));
            }
            n_checks += 1;
        }
        for m in 1..=n {
            let p = t.prove_consistency(m as u64).map_err(|e| e.to_string())?;
            let old = t.root_at(m as u64).map_err(|e| e.to_string())?;
            if old.to_bytes() != oracle::mth(&d[..m]) || p.nodes != digests(oracle::proof(m, &d)) || !verify_consistency(&old, &t.root(), &p) {
                return Err(format!("consistency differs at n={n} m={m}"));
            }
            n_checks += 1;
        }
        for i in 0..n {
            let mut evil = d.clone();
            evil[i][0] ^= 0xff;
            let e = tree(&evil);
            let p = t.prove_inclusion(i as u64).map_err(|e| e.to_string())?;
            if e.root() == t.root() || verify_inclusion(&e.root(), &Digest::from_bytes(leaf_hash(&d[i])), &p) {
                return Err(format!("mutation of leaf {i} at n={n} undetected by root or inclusion"));
            }
            for m in (i + 1)..=n {
                let c = e.prove_consistency(m as u64).map_err(|e| e.to_string())?;
                if verify_consistency(&t.root_at(m as u64).unwrap(), &e.root(), &c) {
                    return Err(format!("mutation of leaf {i} at n={n} consistent with prefix {m}"));
                }
            }
            n_checks += 1;
        }
    }
    Ok(n_checks)
}

/// RFC 8032 Ed25519 vectors and published SHA-256 vectors, exact.
pub fn crypto_vectors() -> Result<usize, String> {
    let mut n = 0;
    for (sk, pk, msg, sig) in vectors::ED25519 {
        let seed: [u8; 32] = hex::decode(sk).unwrap().try_into().unwrap();
        let key = KeyPair::from_seed(seed);
        let m = hex::decode(msg).unwrap();
        let s = sign_raw(&key, &m);
        if key.public_hex() != pk || hex::encode(s) != sig || verify_raw(key.public(), &m, &s) != Ok(true) {
            return Err(format!("Ed25519 vector with public key {pk} differs"));
        }
        n += 1;
    }
    for (m, d) in vectors::sha256() {
        if sha256(&m).as_str() != d {
            return Err(format!("SHA-256 of {}-byte message differs", m.len()));
        }
        n += 1;
    }
    Ok(n)
}
