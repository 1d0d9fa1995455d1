//! Runs a spec file (default: the bundled quick instance) and prints the CSV.

use std::path::PathBuf;

use gscsim::experiment::{run, RunOptions};

fn main() -> gscsim::Result<()> {
    let spec = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/specs/quick.toml")));
    let out_dir = std::env::temp_dir().join("gscsim-example");
    let options = RunOptions {
        out_dir,
        ..RunOptions::default()
    };
    let out = run(&spec, &options)?;
    print!("{}", std::fs::read_to_string(&out.files[0])?);
    eprintln!("sidecar: {}", out.files[1].display());
    Ok(())
}
