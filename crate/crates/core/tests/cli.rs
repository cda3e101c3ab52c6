mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sovereign_mdm::audit::{AuditEvent, AuditLog, EventType};
use sovereign_mdm::identity::Did;
use sovereign_mdm::sim::run;

fn mdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdm")).args(args).env_remove("MDM_OUT_DIR").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn scenario(name: &str) -> PathBuf {
    common::scenario_dir().join(format!("{name}.scenario"))
}

fn simulate(name: &str, out: &Path) {
    let o = mdm(&["sim", "run", "--scenario", &s(&scenario(name)), "--out", &s(out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn wallet_of(out: &Path, label: &str) -> PathBuf {
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.run")).unwrap()).unwrap();
    let did = report["organizations"].as_array().unwrap().iter().find(|o| o["label"] == label).unwrap()["did"]
        .as_str()
        .unwrap()
        .to_owned();
    out.join("wallet").join(did)
}

#[test]
fn sim_run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    simulate("two-party-happy-path", dir.path());
    for f in ["trace.msgs", "audit.log", "audit.checkpoints", "report.run", "registry.trust", "dids", "schemas", "wallet"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    assert_eq!(code(&mdm(&["sim", "run", "--out", &s(dir.path())])), 2);
    assert_eq!(code(&mdm(&["sim", "run", "--scenario", "/nonexistent.scenario", "--out", &s(dir.path())])), 2);
    let bad = dir.path().join("bad.scenario");
    std::fs::write(&bad, "{\"name\":\"x\",\"seed\":1.5}").unwrap();
    assert_eq!(code(&mdm(&["sim", "run", "--scenario", &s(&bad), "--out", &s(dir.path())])), 2);
    assert_eq!(code(&mdm(&[])), 2);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    simulate("four-party-convergence", out);
    let buyer = wallet_of(out, "buyer");
    let common = |p: &Path, at: &str| {
        mdm(&[
            "verify",
            "--presentation",
            &s(p),
            "--registry",
            &s(&out.join("registry.trust")),
            "--status",
            &s(&buyer.join("statuslists")),
            "--schemas",
            &s(&out.join("schemas")),
            "--at",
            at,
        ])
    };
    let mut valid = 0;
    let mut revoked = 0;
    for e in std::fs::read_dir(buyer.join("presentations")).unwrap() {
        let o = common(&e.unwrap().path(), "40");
        match code(&o) {
            0 => {
                assert!(text(&o).contains("verdict Valid"));
                valid += 1;
            }
            1 => {
                let t = text(&o);
                assert!(t.lines().any(|l| l.starts_with("notRevoked") && l.ends_with("fail")), "{t}");
                revoked += 1;
            }
            c => panic!("exit {c}"),
        }
    }
    assert!(valid > 0 && revoked > 0);
    let junk = out.join("junk.pres");
    std::fs::write(&junk, "not json").unwrap();
    assert_eq!(code(&common(&junk, "40")), 2);
    std::fs::write(&junk, "{\"credential\":{}}").unwrap();
    assert_eq!(code(&common(&junk, "40")), 2);
}

#[test]
fn audit_prove_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single.log");
    let mut log = AuditLog::new();
    log.append(AuditEvent::over(EventType::Onboarded, Did::from_public_key(&[7; 32]), None, &"x", 0));
    std::fs::write(&single, log.to_text()).unwrap();
    let o = mdm(&["audit", "prove", "--log", &s(&single), "--index", "0"]);
    assert_eq!(code(&o), 0);
    let proof: serde_json::Value = serde_json::from_str(text(&o).trim()).unwrap();
    assert_eq!(proof["proof"]["path"], serde_json::json!([]));
    assert_eq!(proof["root"], log.root().as_str());
    assert_eq!(code(&mdm(&["audit", "prove", "--log", &s(&single), "--index", "1"])), 2);

    let out = dir.path().join("run");
    simulate("two-party-happy-path", &out);
    let l = out.join("audit.log");
    let size = AuditLog::from_text(&std::fs::read_to_string(&l).unwrap()).unwrap().size();
    let check = |old: u64, new: u64| code(&mdm(&["audit", "check", "--log", &s(&l), "--old", &old.to_string(), "--new", &new.to_string()]));
    assert_eq!(check(0, size), 0);
    assert_eq!(check(size / 2, size), 0);
    assert_eq!(check(size, size), 0);
    assert_eq!(check(1, size + 1), 2);

    let original = std::fs::read_to_string(&l).unwrap();
    let mut lines: Vec<&str> = original.lines().collect();
    lines.swap(1, 2);
    std::fs::write(&l, lines.join("\n") + "\n").unwrap();
    assert_eq!(check(3, size), 1);
}

#[test]
fn wallet_show_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    simulate("four-party-convergence", out);

    let o = mdm(&["wallet", "show", "--dir", &s(&wallet_of(out, "registry"))]);
    assert_eq!(code(&o), 0);
    let t = text(&o);
    let table: Vec<&str> = t.lines().take_while(|l| !l.is_empty()).collect();
    assert_eq!(table.len(), 1, "{t}");
    assert!(table[0].starts_with("CREDENTIAL"));

    let o = mdm(&["wallet", "show", "--dir", &s(&wallet_of(out, "supplier"))]);
    let t = text(&o);
    assert!(t.lines().any(|l| l.contains(" REVOKED ")), "{t}");
    assert!(t.lines().any(|l| l.contains(" VALID ")), "{t}");

    let (_, _, sc) = common::bundled().into_iter().find(|(n, ..)| n == "four-party-convergence").unwrap();
    let outcome = run(&sc).unwrap();
    let golden = outcome.agents["buyer"].golden();
    for threshold in [0u64, 5, 10, 11, 40] {
        let o = mdm(&["wallet", "show", "--dir", &s(&wallet_of(out, "buyer")), "--staleness", &threshold.to_string()]);
        assert_eq!(code(&o), 0);
        let t = text(&o);
        let rows: Vec<(String, String, u64)> = t
            .lines()
            .skip_while(|l| !l.starts_with("RECORD"))
            .skip(1)
            .filter(|l| !l.is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                (f[0].to_owned(), f[1].to_owned(), f[2].parse().unwrap())
            })
            .collect();
        let want: Vec<(String, String, u64)> = golden
            .staleness_report(sc.ticks - 1, threshold)
            .into_iter()
            .map(|e| (e.internal_id, e.attribute, e.staleness))
            .collect();
        assert_eq!(rows, want, "threshold {threshold}");
    }

    let empty = out.join("not-a-wallet");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(code(&mdm(&["wallet", "show", "--dir", &s(&empty)])), 2);
}
