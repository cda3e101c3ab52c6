//! The `mdm` command line. [`main_with`] holds all the logic so the binary
//! stays a one-liner and tests can drive it in-process.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::audit::{checkpoints_from_text, verify_consistency, AuditLog, AuditTree, Checkpoint};
use crate::credential::{
    check_status, verify_presentation, CheckOutcome, CredentialSchema, CredentialStatus, MasterDataCredential,
    Presentation, SchemaRegistry, StatusList,
};
use crate::crypto::{self, to_canonical, Digest};
use crate::identity::{DidDocument, Resolver, TrustRegistry};
use crate::mdm::{GoldenRecord, GoldenStore};
use crate::sim;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mdm", version, about = "Decentralized master data management toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scenario simulation.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Verify a presentation offline.
    Verify(VerifyArgs),
    /// Merkle proofs over an audit log.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Inspect a wallet directory.
    #[command(subcommand)]
    Wallet(WalletCommand),
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Run a scenario and write its artifacts.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "MDM_OUT_DIR")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    presentation: PathBuf,
    #[arg(long)]
    registry: PathBuf,
    /// Directory of `.status` files.
    #[arg(long)]
    status: PathBuf,
    /// Directory of `.schema` files.
    #[arg(long)]
    schemas: PathBuf,
    #[arg(long)]
    at: u64,
    /// Directory of `.diddoc` files; defaults to `dids/` beside the registry.
    #[arg(long)]
    dids: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AuditCommand {
    /// Print the inclusion proof of one leaf.
    Prove {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        index: u64,
    },
    /// Check that the log at size `new` extends the log at size `old`.
    Check {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        old: u64,
        #[arg(long)]
        new: u64,
        /// Trusted checkpoints; defaults to `audit.checkpoints` beside the log.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum WalletCommand {
    /// List credentials and the golden-record staleness report.
    Show {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        staleness: u64,
        /// Evaluation tick; defaults to the tick in `wallet.meta`.
        #[arg(long)]
        at: Option<u64>,
    },
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn internal(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INTERNAL, message: message.into() }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Sim(SimCommand::Run { scenario, seed, out: dir }) => sim_run(&scenario, seed, &dir),
        Command::Verify(args) => verify(&args),
        Command::Audit(AuditCommand::Prove { log, index }) => audit_prove(&log, index),
        Command::Audit(AuditCommand::Check { log, old, new, checkpoints }) => {
            audit_check(&log, old, new, checkpoints.as_deref())
        }
        Command::Wallet(WalletCommand::Show { dir, staleness, at }) => wallet_show(&dir, staleness, at),
    };
    match result {
        Ok((code, text)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(f) => {
            let _ = writeln!(err, "mdm: {}", f.message);
            f.code
        }
    }
}

type Outcome = Result<(i32, String), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_canonical<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = read(path)?;
    let value = crypto::parse(text.trim_end().as_bytes()).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_value(value).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Every file in `dir` with the given extension, by name.
fn files_with(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    out.sort();
    Ok(out)
}

fn sim_run(scenario: &Path, seed: Option<u64>, dir: &Path) -> Outcome {
    let mut s = sim::load_scenario(scenario).map_err(|e| usage(e.to_string()))?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let outcome = sim::run(&s).map_err(|e| internal(e.to_string()))?;
    sim::write_outputs(dir, &outcome).map_err(|e| internal(format!("{}: {e}", dir.display())))?;
    Ok((EXIT_OK, sim::summary_table(&outcome.report)))
}

fn verify(args: &VerifyArgs) -> Outcome {
    let presentation: Presentation = read_canonical(&args.presentation)?;
    let registry: TrustRegistry = read_canonical(&args.registry)?;
    let dids = match &args.dids {
        Some(d) => d.clone(),
        None => args.registry.parent().unwrap_or(Path::new(".")).join("dids"),
    };
    let mut resolver = Resolver::new();
    for path in files_with(&dids, "diddoc")? {
        let doc: DidDocument = read_canonical(&path)?;
        resolver.register(doc).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    let mut lists = BTreeMap::new();
    for path in files_with(&args.status, "status")? {
        let list: StatusList = read_canonical(&path)?;
        lists.insert(list.list_id.clone(), list);
    }
    let mut schemas = SchemaRegistry::new();
    for path in files_with(&args.schemas, "schema")? {
        let schema: CredentialSchema = read_canonical(&path)?;
        schemas.insert(schema).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    let report = verify_presentation(&presentation, &resolver, &registry, &lists, &schemas, args.at);
    let mut text = String::new();
    let _ = writeln!(text, "credential {}  at tick {}", presentation.credential.credential_id, args.at);
    let _ = writeln!(text, "{:<24} OUTCOME", "CHECK");
    for (check, outcome) in &report.checks {
        let o = match outcome {
            CheckOutcome::Pass => "pass",
            CheckOutcome::Fail => "fail",
        };
        let _ = writeln!(text, "{:<24} {o}", check.name());
    }
    let _ = writeln!(text, "verdict {:?}", report.verdict);
    Ok((if report.is_valid() { EXIT_OK } else { EXIT_NEGATIVE }, text))
}

fn load_log(path: &Path) -> Result<AuditLog, Failure> {
    AuditLog::from_text(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn audit_prove(log: &Path, index: u64) -> Outcome {
    let log = load_log(log)?;
    let proof = log.tree().prove_inclusion(index).map_err(|e| usage(e.to_string()))?;
    let leaf = &log.tree().leaves()[index as usize];
    let body = serde_json::json!({ "leafHash": leaf, "proof": proof, "root": log.root() });
    let text = to_canonical(&body).map_err(|e| internal(e.to_string()))?;
    Ok((EXIT_OK, format!("{}\n", text.as_str())))
}

fn audit_check(log_path: &Path, old: u64, new: u64, checkpoints: Option<&Path>) -> Outcome {
    let log = load_log(log_path)?;
    if old > new || new > log.size() {
        return Err(usage(format!("need old <= new <= {} (log size)", log.size())));
    }
    let cp_path = match checkpoints {
        Some(p) => Some(p.to_path_buf()),
        None => Some(log_path.with_file_name("audit.checkpoints")).filter(|p| p.is_file()),
    };
    let trusted: Vec<Checkpoint> = match &cp_path {
        Some(p) => checkpoints_from_text(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => Vec::new(),
    };
    let root_of = |size: u64| -> Result<(Digest, bool), Failure> {
        match trusted.iter().rev().find(|c| c.size == size) {
            Some(c) => Ok((c.root.clone(), true)),
            None => log.tree().root_at(size).map(|r| (r, false)).map_err(|e| usage(e.to_string())),
        }
    };
    let (old_root, old_trusted) = root_of(old)?;
    let (new_root, new_trusted) = root_of(new)?;
    let recomputed_new = log.tree().root_at(new).map_err(|e| usage(e.to_string()))?;
    let consistent = recomputed_new == new_root
        && (old == 0 || {
            let prefix = AuditTree::from_leaf_hashes(log.tree().leaves()[..new as usize].iter().map(Digest::to_bytes));
            let proof = prefix.prove_consistency(old).map_err(|e| usage(e.to_string()))?;
            verify_consistency(&old_root, &new_root, &proof)
        });
    let mut text = String::new();
    let source = |t: bool| if t { "checkpoint" } else { "log" };
    let _ = writeln!(text, "old  size {old:<6} root {old_root} ({})", source(old_trusted));
    let _ = writeln!(text, "new  size {new:<6} root {new_root} ({})", source(new_trusted));
    let _ = writeln!(text, "consistent {consistent}");
    Ok((if consistent { EXIT_OK } else { EXIT_NEGATIVE }, text))
}

fn wallet_show(dir: &Path, threshold: u64, at: Option<u64>) -> Outcome {
    let meta_path = dir.join("wallet.meta");
    let meta: serde_json::Value = read_canonical(&meta_path)?;
    for sub in ["credentials", "statuslists", "golden"] {
        if !dir.join(sub).is_dir() {
            return Err(usage(format!("{}: missing {sub}/", dir.display())));
        }
    }
    let tick = match at {
        Some(t) => t,
        None => meta["tick"].as_u64().ok_or_else(|| usage(format!("{}: no tick", meta_path.display())))?,
    };
    let mut lists = BTreeMap::new();
    for path in files_with(&dir.join("statuslists"), "status")? {
        let list: StatusList = read_canonical(&path)?;
        lists.insert(list.list_id.clone(), list);
    }
    let mut text = String::new();
    let _ = writeln!(text, "{:<28} {:<42} {:>7} {:<8} EXPIRES", "CREDENTIAL", "ISSUER", "VERSION", "STATUS");
    for path in files_with(&dir.join("credentials"), "vc")? {
        let vc: MasterDataCredential = read_canonical(&path)?;
        let status = match lists.get(&vc.status.list_id).map(|l| check_status(l, vc.status.index)) {
            Some(Ok(CredentialStatus::Revoked)) => "REVOKED",
            _ if vc.is_expired(tick) => "EXPIRED",
            Some(Ok(CredentialStatus::Valid)) => "VALID",
            _ => "UNKNOWN",
        };
        let expires = vc.expires_at.map_or_else(|| "-".to_owned(), |e| e.to_string());
        let _ = writeln!(text, "{:<28} {:<42} {:>7} {:<8} {expires}", vc.credential_id, vc.issuer, vc.version, status);
    }
    let mut store = GoldenStore::new();
    for path in files_with(&dir.join("golden"), "record")? {
        let record: GoldenRecord = read_canonical(&path)?;
        store.insert_record(record);
    }
    let _ = writeln!(text);
    let _ = writeln!(text, "staleness at tick {tick}, threshold {threshold}");
    let _ = writeln!(text, "{:<22} {:<16} STALENESS", "RECORD", "ATTRIBUTE");
    for e in store.staleness_report(tick, threshold) {
        let _ = writeln!(text, "{:<22} {:<16} {}", e.internal_id, e.attribute, e.staleness);
    }
    Ok((EXIT_OK, text))
}
