//! Reference implementations written independently of the library, plus
//! helpers for loading the bundled scenarios.
#![allow(dead_code)]

pub mod canonical;
pub mod checks;
pub mod credential;
pub mod merkle;
pub mod negotiation;
pub mod policy;
pub mod sha256;
pub mod replay;
pub mod vectors;

use std::path::PathBuf;

use sovereign_mdm::sim::{load_scenario, Scenario};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Every bundled scenario, sorted by file name.
pub fn bundled() -> Vec<(String, PathBuf, Scenario)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "scenario"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let s = load_scenario(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p.file_stem().unwrap().to_string_lossy().into_owned(), p, s)
        })
        .collect()
}

/// Runs every bundled scenario twice through the `mdm` binary and compares
/// the persisted artifacts byte for byte. Returns the number of scenarios.
pub fn byte_identical_runs() -> Result<usize, String> {
    let scenarios = bundled();
    for (name, path, _) in &scenarios {
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            let o = std::process::Command::new(env!("CARGO_BIN_EXE_mdm"))
                .args(["sim", "run", "--scenario"])
                .arg(path)
                .arg("--out")
                .arg(d.path())
                .env_remove("MDM_OUT_DIR")
                .output()
                .map_err(|e| e.to_string())?;
            if o.status.code() != Some(0) {
                return Err(format!("{name}: exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
            }
        }
        for f in ["trace.msgs", "audit.log", "report.run"] {
            let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| format!("{name}/{f}: {e}"))?;
            let b = std::fs::read(dirs[1].path().join(f)).map_err(|e| format!("{name}/{f}: {e}"))?;
            if a != b {
                return Err(format!("{name}: {f} differs between runs"));
            }
        }
    }
    Ok(scenarios.len())
}
