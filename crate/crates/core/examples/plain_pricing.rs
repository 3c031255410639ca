//! Plain Monte Carlo for a deep out-of-the-money Asian basket call.
//!
//! Shows why the problem needs importance sampling: with κ below one percent
//! the standard error stays large even at `N = 10⁵`.

use isdrift::config::RunConfig;
use isdrift::models::ModelKind;
use isdrift::pipeline::price_plain;

fn main() -> isdrift::Result<()> {
    let resolved = RunConfig::for_model(ModelKind::BlackScholes, 2).resolve()?;
    println!(
        "{} assets, strike {:.3}, weights {:?}",
        resolved.model.n_assets(),
        resolved.payoff.strike(),
        resolved.payoff.weights().iter().map(|w| (w * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
    for report in price_plain(&resolved)? {
        println!("{report}");
    }
    Ok(())
}
