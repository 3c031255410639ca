//! Minimization of the variance functional over network parameters.
//!
//! Paths are simulated under the original measure, so `F²(X)` does not depend
//! on the parameters and the whole parameter dependence sits in the inverse
//! likelihood:
//!
//! ```text
//! V̂(θ) = (1/B) Σ_p F_p² exp(−Σ_k f_kᵀΔM_k^p + ‖h‖²_H/2)
//! ∂V̂/∂θ = Σ_k (∂f_k/∂θ)ᵀ u_k,   u_k = (1/B) Σ_p F_p² e^{ℓ_p} (−ΔM_k^p + π f_k Δμ_k)
//! ```
//!
//! `∂f_k/∂θ` is shared by all paths, so one backward pass per grid node is
//! enough for the whole batch.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::EstimatorReport;
use crate::error::{Error, Result};
use crate::ffn::{Activation, AdamConfig, AdamState, ParamGradient, ShallowNet};
use crate::gaussian::{log_likelihood_inverse, CovariationSpec};
use crate::linalg::pairwise_sum;
use crate::models::{drift_from_net, ModelSpec, Simulator};
use crate::payoffs::PathFunctional;
use crate::rng::{substream, Domain, Rng};

/// Largest admissible `log` of a per-path likelihood weight.
pub const LOG_WEIGHT_LIMIT: f64 = 50.0;

const TRAIN_BLOCK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// New paths for every gradient step.
    #[default]
    Fresh,
    /// One path set reused for every step.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps_per_epoch: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Grid step used for training paths.
    pub dt: f64,
    pub seed: u64,
    pub resampling: Resampling,
    /// Rescale gradients whose Euclidean norm exceeds this.
    pub clip_norm: Option<f64>,
    /// Steps averaged when choosing the returned checkpoint.
    pub smoothing_window: usize,
    /// Hidden width; the driver dimension when unset.
    pub hidden: Option<usize>,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            steps_per_epoch: 100,
            epochs: 50,
            adam: AdamConfig::default(),
            dt: 1.0 / 252.0,
            seed: 1,
            resampling: Resampling::Fresh,
            clip_norm: None,
            smoothing_window: 100,
            hidden: None,
            activation: Activation::ScaledTanh,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if self.batch_size < 2 {
            return bad("batch_size", "must be at least 2");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", "must be positive");
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.epsilon > 0.0)
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
        {
            return bad("adam", "need lr, ε > 0 and β₁, β₂ ∈ [0, 1)");
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return bad("clip_norm", "must be positive");
            }
        }
        if self.smoothing_window == 0 {
            return bad("smoothing_window", "must be positive");
        }
        if self.hidden == Some(0) {
            return bad("hidden", "must be positive");
        }
        Ok(())
    }

    /// Fresh network for a driver of dimension `d`, output layer zero.
    pub fn init_net(&self, d: usize) -> ShallowNet {
        let mut rng = substream(self.seed, Domain::Init, 0);
        ShallowNet::init(self.hidden.unwrap_or(d), d, self.activation, &mut rng)
    }
}

/// Squared payoffs and driver increments of paths simulated under `P`.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    n_paths: usize,
    len: usize,
    payoff_sq: Vec<f64>,
    increments: Vec<f64>,
}

impl TrainingBatch {
    /// Simulates `n_paths` paths in blocks; block `b` of batch `batch_id`
    /// uses its own substream, so the result is independent of threading.
    pub fn simulate(
        model: &ModelSpec,
        payoff: &dyn PathFunctional,
        cov: &CovariationSpec,
        seed: u64,
        batch_id: u64,
        n_paths: usize,
    ) -> Result<Self> {
        let sim = Simulator::new(model, cov)?;
        let n_blocks = n_paths.div_ceil(TRAIN_BLOCK);
        let blocks = (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = substream(seed, Domain::Training, (batch_id << 24) | b as u64);
                let count = TRAIN_BLOCK.min(n_paths - b * TRAIN_BLOCK);
                simulate_block(&sim, payoff, &mut rng, b * TRAIN_BLOCK, count)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_blocks(cov, n_paths, blocks))
    }

    /// Simulates sequentially from a caller-supplied stream.
    pub fn simulate_with_rng(
        model: &ModelSpec,
        payoff: &dyn PathFunctional,
        cov: &CovariationSpec,
        rng: &mut Rng,
        n_paths: usize,
    ) -> Result<Self> {
        let sim = Simulator::new(model, cov)?;
        let block = simulate_block(&sim, payoff, rng, 0, n_paths)?;
        Ok(Self::from_blocks(cov, n_paths, vec![block]))
    }

    fn from_blocks(cov: &CovariationSpec, n_paths: usize, blocks: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        let len = cov.grid().n_steps() * cov.d();
        let mut payoff_sq = Vec::with_capacity(n_paths);
        let mut increments = Vec::with_capacity(n_paths * len);
        for (f, dm) in blocks {
            payoff_sq.extend(f);
            increments.extend(dm);
        }
        TrainingBatch {
            n_paths,
            len,
            payoff_sq,
            increments,
        }
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn payoff_sq(&self) -> &[f64] {
        &self.payoff_sq
    }

    pub fn increments(&self, p: usize) -> &[f64] {
        &self.increments[p * self.len..(p + 1) * self.len]
    }

    /// Fraction of paths with a positive payoff.
    pub fn hit_rate(&self) -> f64 {
        self.payoff_sq.iter().filter(|f| **f > 0.0).count() as f64 / self.n_paths.max(1) as f64
    }
}

fn simulate_block(
    sim: &Simulator<'_>,
    payoff: &dyn PathFunctional,
    rng: &mut Rng,
    first_path: usize,
    count: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let cov = sim.covariation();
    let grid = cov.grid();
    let m = sim.model().state_dim();
    let n_assets = sim.model().n_assets();
    let mut scratch = sim.scratch();
    let mut f2 = Vec::with_capacity(count);
    let mut dms = Vec::with_capacity(count * grid.n_steps() * cov.d());
    for i in 0..count {
        sim.simulate_path(rng, &mut scratch, first_path + i)?;
        let view = crate::models::PathView::new(scratch.states(), m, n_assets);
        let v = payoff.outcome(&view, grid)?.value;
        f2.push(v * v);
        dms.extend_from_slice(scratch.increments());
    }
    Ok((f2, dms))
}

/// `V̂` and its parameter gradient on one batch.
#[derive(Debug, Clone)]
pub struct ObjectiveEstimate {
    pub value: f64,
    pub grad: ParamGradient,
    /// `‖h‖²_H` of the evaluated drift.
    pub norm_sq: f64,
    /// `false` when every payoff in the batch is zero, in which case value
    /// and gradient are zero and carry no information.
    pub informative: bool,
}

/// Evaluates `V̂` and `∂V̂/∂θ` for `net` on a pre-simulated batch.
pub fn objective(
    net: &ShallowNet,
    cov: &CovariationSpec,
    batch: &TrainingBatch,
) -> Result<ObjectiveEstimate> {
    let d = cov.d();
    let n = cov.grid().n_steps();
    if batch.len != n * d {
        return Err(Error::dims("training batch increments", n * d, batch.len));
    }
    let drift = drift_from_net(net, cov)?;
    let n_params = net.params().len();
    if batch.payoff_sq.iter().all(|f| *f == 0.0) {
        return Ok(ObjectiveEstimate {
            value: 0.0,
            grad: ParamGradient::zeros(n_params),
            norm_sq: drift.norm_sq(),
            informative: false,
        });
    }
    let b = batch.n_paths as f64;
    let mut weights = Vec::with_capacity(batch.n_paths);
    for p in 0..batch.n_paths {
        let f2 = batch.payoff_sq[p];
        let dm = batch.increments(p);
        let log_w = log_likelihood_inverse(&drift, dm)?;
        if log_w > LOG_WEIGHT_LIMIT {
            return Err(Error::WeightOverflow {
                path: p,
                log_weight: log_w,
                limit: LOG_WEIGHT_LIMIT,
            });
        }
        weights.push(if f2 == 0.0 { 0.0 } else { f2 * log_w.exp() });
    }
    let value = pairwise_sum(&weights) / b;
    if !value.is_finite() {
        return Err(Error::NonFinite("objective"));
    }

    // u_k = −(1/B) Σ_p a_p ΔM_k^p + V̂ · π f_k Δμ_k
    let mut upstream = vec![0.0; n * d];
    for (p, a) in weights.iter().enumerate() {
        if *a == 0.0 {
            continue;
        }
        let scale = -a / b;
        for (u, x) in upstream.iter_mut().zip(batch.increments(p)) {
            *u += scale * x;
        }
    }
    let mut grad = ParamGradient::zeros(n_params);
    let times = cov.grid().left_times();
    for k in 0..n {
        let u = &mut upstream[k * d..(k + 1) * d];
        for (ui, s) in u.iter_mut().zip(drift.increment(k)) {
            *ui += value * s;
        }
        net.backward_accumulate(times[k], u, &mut grad.0);
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("objective gradient"));
    }
    Ok(ObjectiveEstimate {
        value,
        grad,
        norm_sq: drift.norm_sq(),
        informative: true,
    })
}

/// Simulates `batch_size` paths under `P` from `rng` and evaluates the
/// objective on them.
pub fn objective_batch(
    net: &ShallowNet,
    model: &ModelSpec,
    payoff: &dyn PathFunctional,
    cov: &CovariationSpec,
    rng: &mut Rng,
    batch_size: usize,
) -> Result<ObjectiveEstimate> {
    let batch = TrainingBatch::simulate_with_rng(model, payoff, cov, rng, batch_size)?;
    objective(net, cov, &batch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub objective: f64,
    pub h_norm_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub h_norm_sq: f64,
    pub mean_objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub steps: Vec<TraceStep>,
    pub epochs: Vec<EpochRecord>,
    /// Step whose parameters were returned; `None` when the input network
    /// was returned unchanged.
    pub best_step: Option<usize>,
    pub best_smoothed: Option<f64>,
}

impl TrainTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "objective", "h_norm_sq"])?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.objective.to_string(),
                s.h_norm_sq.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: ShallowNet,
    pub trace: TrainTrace,
    /// Set when training stopped early; the returned network is the last
    /// good checkpoint.
    pub halted: Option<String>,
}

/// Runs `epochs × steps_per_epoch` Adam steps and returns the parameters with
/// the lowest trailing mean of `V̂` over `smoothing_window` steps.
pub fn train(
    net: &ShallowNet,
    model: &ModelSpec,
    payoff: &dyn PathFunctional,
    cov: &CovariationSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    model.ensure_valid()?;
    if net.output() != cov.d() {
        return Err(Error::dims("network output width", cov.d(), net.output()));
    }
    let total = config.epochs * config.steps_per_epoch;
    let mut params = net.params().to_vec();
    let mut current = net.clone();
    let mut adam = AdamState::new(params.len(), config.adam);
    let mut trace = TrainTrace::default();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut window_sum = 0.0;
    let mut halted = None;
    let fixed = match config.resampling {
        Resampling::Fixed if total > 0 => Some(TrainingBatch::simulate(
            model,
            payoff,
            cov,
            config.seed,
            0,
            config.batch_size,
        )?),
        _ => None,
    };

    'outer: for epoch in 0..config.epochs {
        let epoch_start = trace.steps.len();
        for _ in 0..config.steps_per_epoch {
            let step = trace.steps.len();
            let fresh;
            let batch = match &fixed {
                Some(b) => b,
                None => {
                    fresh = TrainingBatch::simulate(
                        model,
                        payoff,
                        cov,
                        config.seed,
                        step as u64,
                        config.batch_size,
                    )?;
                    &fresh
                }
            };
            let est = match objective(&current, cov, batch) {
                Ok(e) => e,
                Err(e @ (Error::WeightOverflow { .. } | Error::NonFinite(_))) => {
                    halted = Some(format!("step {step}: {e}"));
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            trace.steps.push(TraceStep {
                step,
                objective: est.value,
                h_norm_sq: est.norm_sq,
            });

            let w = config.smoothing_window;
            window_sum += est.value;
            if step >= w {
                window_sum -= trace.steps[step - w].objective;
            }
            if step + 1 >= w {
                let smoothed = window_sum / w as f64;
                if best.as_ref().is_none_or(|(b, _, _)| smoothed < *b) {
                    best = Some((smoothed, step, params.clone()));
                }
            }

            let mut grad = est.grad;
            if let Some(c) = config.clip_norm {
                let norm = grad.norm();
                if norm > c {
                    grad.0.iter_mut().for_each(|g| *g *= c / norm);
                }
            }
            adam.step(&mut params, &grad.0)?;
            if let Err(e) = current.set_params(&params) {
                halted = Some(format!("step {step}: {e}"));
                break 'outer;
            }
        }
        let h = drift_from_net(&current, cov)?.norm_sq();
        let steps = &trace.steps[epoch_start..];
        let mean_objective = steps.iter().map(|s| s.objective).sum::<f64>() / steps.len().max(1) as f64;
        trace.epochs.push(EpochRecord {
            epoch,
            h_norm_sq: h,
            mean_objective,
        });
    }

    let net = match best {
        Some((smoothed, step, p)) => {
            trace.best_step = Some(step);
            trace.best_smoothed = Some(smoothed);
            ShallowNet::from_params(net.hidden(), net.output(), net.activation(), p)?
        }
        // Too few steps to fill one window: keep the last parameters.
        None if halted.is_none() && !trace.steps.is_empty() => {
            trace.best_step = Some(trace.steps.len() - 1);
            current
        }
        None => net.clone(),
    };
    Ok(TrainOutcome {
        net,
        trace,
        halted,
    })
}

/// Ratio of per-sample variances, plain over importance-sampled.
pub fn variance_ratio(plain: &EstimatorReport, weighted: &EstimatorReport) -> Result<f64> {
    let (a, b) = (plain.variance, weighted.variance);
    if b == 0.0 {
        if a == 0.0 {
            return Ok(1.0);
        }
        // Typically every weighted payoff was zero: the drift left the exercise region.
        return Err(Error::NonFinite("variance ratio"));
    }
    Ok(a / b)
}
