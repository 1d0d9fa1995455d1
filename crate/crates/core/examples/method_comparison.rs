//! All six estimators on one instance, with efficiency metrics.

use gscsim::exec::Executor;
use gscsim::experiment::{run_method, Hyper};
use gscsim::metrics::efficiency_report;
use gscsim::model::{ChannelConfig, Method};
use gscsim::rng::RngStream;

fn main() -> gscsim::Result<()> {
    let cfg = ChannelConfig::identical(6, 3, 0.5, 0.8)?;
    let exec = Executor::default();
    let hyper = Hyper::default();
    println!(
        "{:<4} {:>11} {:>8} {:>10} {:>10}",
        "", "p_hat", "RE %", "SCV", "WNRV work"
    );
    for (k, method) in Method::ALL.into_iter().enumerate() {
        let samples = if method == Method::Mls { 2000 } else { 200_000 };
        let r = run_method(
            method,
            &cfg,
            samples,
            &hyper,
            &RngStream::new(2, k as u64),
            &exec,
        )?;
        let e = efficiency_report(&r)?;
        println!(
            "{:<4} {:>11.4e} {:>8.3} {:>10.3e} {:>10.3e}",
            method,
            r.p_hat,
            100.0 * e.re,
            e.scv,
            e.wnrv.work
        );
    }
    Ok(())
}
