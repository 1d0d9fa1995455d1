//! Multilevel splitting over a gamma-process embedding with pilot-placed levels.

use gscsim::estimators::{estimate_mls, mls_pilot_levels, MlsOptions, PilotOptions};
use gscsim::exec::Executor;
use gscsim::metrics::relative_error;
use gscsim::model::ChannelConfig;
use gscsim::rng::RngStream;

fn main() -> gscsim::Result<()> {
    let cfg = ChannelConfig::identical(8, 4, 0.5, 1.0)?;
    let schedule = mls_pilot_levels(&cfg, &PilotOptions::default(), &RngStream::new(11, 1))?;
    let levels: Vec<String> = schedule.levels.iter().map(|t| format!("{t:.3}")).collect();
    println!("levels [{}]", levels.join(", "));

    let opts = MlsOptions {
        per_level_samples: 2000,
        replications: 20,
        levels: Some(schedule.levels),
        ..MlsOptions::default()
    };
    let r = estimate_mls(&cfg, &opts, &RngStream::new(11, 0), &Executor::default())?;
    println!(
        "p = {:.4e}  RE = {:.2}%  chain steps = {}",
        r.p_hat,
        100.0 * relative_error(&r)?,
        r.samples
    );
    Ok(())
}
