//! Driving a job from a JSON config, the same way the `gaussprep` binary does.
//!
//! Usage: `cargo run --example cli_config -- [path/to/config.json]`
//! Defaults to `examples/configs/simulate.json`.

use std::path::PathBuf;

use gaussprep::cli::{run, JobConfig};

fn main() {
    env_logger::init();
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/simulate.json"));
    let config = JobConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let report = run(&config).expect("job runs");
    for v in &report.verdicts {
        println!("{:<24} {}", v.name, if v.passed { "ok" } else { "FAILED" });
    }
    println!("success: {}", report.success);
}
