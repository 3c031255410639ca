//! Random model parameters from a recipe.
//!
//! Draws Heston parameters until the Feller condition holds for every asset
//! and prints the resolved run config, which is a fixed point of resolution.

use isdrift::config::{sample_parameters, Range, Recipe, RunConfig};
use isdrift::models::ModelKind;

fn main() -> isdrift::Result<()> {
    let recipe = Recipe {
        seed: 11,
        sigma_variance: Some(Range::new(0.0, 0.9)?),
        ..Recipe::default()
    };
    let spec = sample_parameters(ModelKind::Heston, 3, 0.05, &recipe)?;
    for k in 0..3 {
        let row = spec.sigma.row(3 + k);
        let lhs = 2.0 * spec.speed[k] * spec.mean_level[k];
        let rhs: f64 = row.iter().map(|x| x * x).sum();
        println!("asset {k}: 2Θm = {lhs:.3} ≥ |σ|² = {rhs:.3}");
    }

    let resolved = RunConfig::for_model(ModelKind::Heston, 11).resolve()?;
    let text = resolved.config.to_toml()?;
    println!("\n{text}");
    let again = RunConfig::from_toml(&text)?.resolve()?;
    assert_eq!(again.config.to_toml()?, text);
    Ok(())
}
