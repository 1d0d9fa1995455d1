//! Partition importance sampling: block plan, rejection constants and the estimate.

use gscsim::estimators::{estimate_pis, Diagnostics, PartitionPlan};
use gscsim::exec::Executor;
use gscsim::metrics::relative_error;
use gscsim::model::ChannelConfig;
use gscsim::rng::RngStream;

fn main() -> gscsim::Result<()> {
    let cfg = ChannelConfig::identical(8, 4, 0.5, 1.0)?;
    let plan = PartitionPlan::new(&cfg)?;
    println!(
        "blocks {:?}, ell2 = {:.4e}",
        plan.blocks.iter().map(|b| b.size).collect::<Vec<_>>(),
        plan.ell2
    );

    let r = estimate_pis(&cfg, 1_000_000, &RngStream::new(7, 0), &Executor::default())?;
    println!(
        "p = {:.4e}  RE = {:.3}%",
        r.p_hat,
        100.0 * relative_error(&r)?
    );
    if let Diagnostics::Pis {
        bounds, rejection, ..
    } = &r.diagnostics
    {
        for b in bounds {
            println!("M_ell = {:.4} ({:?})", b.value, b.case);
        }
        println!("acceptance rate {:.4}", rejection.acceptance_rate());
    }
    Ok(())
}
