//! Noncentral chi-square tails, quantiles and the Marcum Q function.

use gscsim::specfun::{marcum_q, ncx2_cdf, ncx2_log_cdf, ncx2_quantile, Ncx2Params};

fn main() -> gscsim::Result<()> {
    // Aggregate of eight branches with mu = 0.5, evaluated deep in the lower tail.
    let law = Ncx2Params::new(16, 4.0)?;
    for x in [2.0, 0.2, 0.002] {
        println!(
            "F({x}) = {:.6e}  ln F = {:.4}",
            ncx2_cdf(x, &law),
            ncx2_log_cdf(x, &law)
        );
    }
    let x = ncx2_quantile(1e-12, &law)?;
    println!(
        "1e-12 quantile = {x:.6}, CDF there = {:.3e}",
        ncx2_cdf(x, &law)
    );
    println!("Q_1(1, 2) = {:.10}", marcum_q(1, 1.0, 2.0)?);
    Ok(())
}
