//! Run a bundled config programmatically and print the manifest.
//!
//! `cargo run --example run_config -- ou_smoke /tmp/ou_smoke`

use semimono::runner::{self, RunOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let config = args.next().unwrap_or_else(|| "ou_smoke".into());
    let out_dir = args.next().map(Into::into);
    let outcome = runner::run_path(&config, &RunOptions { out_dir, ..Default::default() });
    match &outcome.manifest {
        Some(m) => println!("{}", serde_json::to_string_pretty(m).expect("serialisable")),
        None => eprintln!("{}", outcome.error.as_deref().unwrap_or("no manifest")),
    }
    std::process::exit(outcome.exit_code);
}
