//! SCV against the LOS magnitude at a large threshold, as plot-ready CSV.

use std::io;

use gscsim::experiment::{execute, write_sweep_csv, ExperimentSpec, RunOptions};

const SPEC: &str = r#"
methods = ["pis", "et", "ce"]

[config]
antennas = 8
selected = 4
mu = 1.0
gamma_th = 17.0

[samples]
default = 100000

[hyper]
ce_pilot_samples = 50000

[sweep]
axis = "mu"
values = [1.0, 1.5, 2.0, 2.5, 3.0]
"#;

fn main() -> gscsim::Result<()> {
    let spec = ExperimentSpec::parse(SPEC)?;
    let rows = execute(&spec, &RunOptions::default())?;
    write_sweep_csv(&rows, io::stdout())
}
