//! Uniform (truncated-marginal) importance sampling against crude Monte Carlo.

use gscsim::estimators::{estimate_nmc, estimate_uis};
use gscsim::exec::Executor;
use gscsim::metrics::{relative_error, scv};
use gscsim::model::ChannelConfig;
use gscsim::rng::RngStream;

fn main() -> gscsim::Result<()> {
    let cfg = ChannelConfig::identical(4, 2, 0.5, 0.3)?;
    let exec = Executor::default();
    let nmc = estimate_nmc(&cfg, 1_000_000, &RngStream::new(1, 0), &exec)?;
    let uis = estimate_uis(&cfg, 200_000, &RngStream::new(1, 1), &exec)?;
    for r in [&nmc, &uis] {
        println!(
            "{}: p = {:.4e}  RE = {:.2}%  SCV = {:.3e}",
            r.method,
            r.p_hat,
            100.0 * relative_error(r)?,
            scv(r)?
        );
    }
    Ok(())
}
