//! Importance sampling under Heston, 3/2 and Stein & Stein dynamics.
//!
//! ```text
//! cargo run --release --example stochastic_volatility -- heston
//! ```

use isdrift::config::RunConfig;
use isdrift::models::ModelKind;
use isdrift::pipeline::{compare_all, price_importance, price_plain, train_resolved};

fn main() -> isdrift::Result<()> {
    let kind = match std::env::args().nth(1).as_deref().unwrap_or("heston") {
        "heston" => ModelKind::Heston,
        "three_halves" => ModelKind::ThreeHalves,
        "stein_stein" => ModelKind::SteinStein,
        other => return Err(isdrift::Error::Config(format!("unknown model {other}"))),
    };
    let resolved = RunConfig::for_model(kind, 2).resolve()?;
    let plain = price_plain(&resolved)?;
    let trained = train_resolved(&resolved)?;
    let weighted = price_importance(&resolved, &trained.net)?;
    println!("{kind}, {} assets", resolved.model.n_assets());
    for row in compare_all(&plain, &weighted)? {
        println!("{row}");
    }
    Ok(())
}
