//! Run a scenario through the simulator and print its summary. Pass a
//! scenario path as the first argument and, optionally, an output directory.

use std::path::PathBuf;

use sovereign_mdm::sim::{load_scenario, run, summary_table, write_outputs};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/four-party-convergence.scenario")
    });
    let scenario = load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let outcome = run(&scenario).unwrap();
    print!("{}", summary_table(&outcome.report));
    if let Some(dir) = args.next() {
        write_outputs(&PathBuf::from(&dir), &outcome).unwrap();
        println!("artifacts written to {dir}");
    }
}
