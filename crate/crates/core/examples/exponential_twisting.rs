//! Exponential twisting as the threshold shrinks: the SCV stays flat.

use gscsim::estimators::estimate_et;
use gscsim::exec::Executor;
use gscsim::metrics::scv;
use gscsim::model::ChannelConfig;
use gscsim::rng::RngStream;

fn main() -> gscsim::Result<()> {
    let exec = Executor::default();
    for gamma in [1.0, 0.1, 0.01, 0.001] {
        let cfg = ChannelConfig::identical(8, 4, 0.5, gamma)?;
        let r = estimate_et(&cfg, 200_000, &RngStream::new(3, 0), &exec)?;
        println!(
            "gamma {gamma:>6}: p = {:.4e}  SCV = {:.3}",
            r.p_hat,
            scv(&r)?
        );
    }
    Ok(())
}
