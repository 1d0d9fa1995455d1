//! Exact outage probabilities for selection (m = 1) and full combining (m = M).

use gscsim::model::{closed_form_outage, ChannelConfig};

fn main() -> gscsim::Result<()> {
    for (m_total, m, mu, gamma) in [
        (2, 1, 0.0, 1.0),
        (4, 1, 0.5, 0.3),
        (8, 8, 0.5, 1.0),
        (8, 8, 2.0, 5.0),
    ] {
        let cfg = ChannelConfig::identical(m_total, m, mu, gamma)?;
        let p = closed_form_outage(&cfg).expect("m = 1 or m = M");
        println!("M={m_total} m={m} mu={mu} gamma={gamma}: P = {p:.6e}");
    }
    Ok(())
}
