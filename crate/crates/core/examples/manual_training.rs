//! The training loop spelled out with the low-level pieces.
//!
//! Each step simulates a fresh batch under `P`, evaluates the second moment
//! `V̂` of the reweighted payoff and its gradient, and takes an Adam step.

use isdrift::ffn::{AdamConfig, AdamState};
use isdrift::gaussian::TimeGrid;
use isdrift::linalg::Matrix;
use isdrift::models::{ModelKind, ModelSpec};
use isdrift::payoffs::PayoffSpec;
use isdrift::rng::{substream, Domain};
use isdrift::training::{objective_batch, TrainConfig};

fn main() -> isdrift::Result<()> {
    let model = ModelSpec {
        kind: ModelKind::BlackScholes,
        mu: vec![0.05, 0.05],
        mean_level: vec![],
        speed: vec![],
        sigma: Matrix::from_rows(&[vec![0.25, 0.05], vec![0.05, 0.2]])?,
        s0: vec![1.0, 1.0],
        v0: vec![],
        rate: 0.05,
    };
    let cov = model.covariation(TimeGrid::uniform(1.0, 50)?)?;
    let payoff = PayoffSpec::asian_call(vec![0.5, 0.5], 1.25)?;

    let mut net = TrainConfig::default().init_net(2);
    let mut params = net.params().to_vec();
    let mut adam = AdamState::new(
        params.len(),
        AdamConfig {
            learning_rate: 0.02,
            ..AdamConfig::default()
        },
    );
    for step in 0..400 {
        let mut rng = substream(5, Domain::Training, step);
        let est = objective_batch(&net, &model, &payoff, &cov, &mut rng, 512)?;
        if step % 50 == 0 {
            println!("step {step:>3}: V̂ = {:.3e}, ‖h‖² = {:.3}", est.value, est.norm_sq);
        }
        adam.step(&mut params, est.grad.as_slice())?;
        net.set_params(&params)?;
    }
    Ok(())
}
