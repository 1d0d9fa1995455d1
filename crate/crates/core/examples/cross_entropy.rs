//! Cross-entropy adaptation of a scaled noncentral chi-square proposal.

use gscsim::estimators::{estimate_ce, CeOptions, Diagnostics};
use gscsim::exec::Executor;
use gscsim::metrics::relative_error;
use gscsim::model::ChannelConfig;
use gscsim::rng::RngStream;

fn main() -> gscsim::Result<()> {
    let cfg = ChannelConfig::identical(8, 4, 0.5, 0.5)?;
    let r = estimate_ce(
        &cfg,
        500_000,
        &CeOptions::default(),
        &RngStream::new(5, 0),
        &Executor::default(),
    )?;
    if let Diagnostics::Ce { trace, .. } = &r.diagnostics {
        for t in trace {
            println!(
                "iteration {}: level {:.4}  v1 = {:.4e}  v2 = {:.4e}",
                t.iteration, t.gamma_t, t.v1, t.v2
            );
        }
    }
    println!(
        "p = {:.4e}  RE = {:.3}%",
        r.p_hat,
        100.0 * relative_error(&r)?
    );
    Ok(())
}
