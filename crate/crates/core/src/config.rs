//! Run configuration and random parameter recipes.
//!
//! A run is described by one TOML file. [`RunConfig::resolve`] fills every
//! defaulted field (sampled model parameters, weights, strike, barriers) and
//! the resolved config, written back out, resolves to itself.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::engine::Format;
use crate::error::{Error, Result};
use crate::gaussian::{CovariationSpec, TimeGrid};
use crate::linalg::{dot, Matrix};
use crate::models::{ModelKind, ModelSpec, Violation};
use crate::payoffs::{basket_weights, Averaging, Barrier, PayoffKind, PayoffSpec};
use crate::rng::{substream, Domain, Rng};
use crate::training::TrainConfig;

pub const SCHEMA: &str = "isdrift.run/v1";

/// Closed interval `[lo, hi]` for uniform sampling, written as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("bad range [{lo}, {hi}]")));
        }
        Ok(Range { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Range { lo: x, hi: x }
    }

    pub fn draw(&self, rng: &mut Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..self.hi)
        }
    }
}

impl TryFrom<[f64; 2]> for Range {
    type Error = Error;

    fn try_from([lo, hi]: [f64; 2]) -> Result<Self> {
        Range::new(lo, hi)
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.lo, r.hi]
    }
}

/// Ranges for randomly sampled model parameters.
///
/// `Σ` is drawn blockwise: `sigma_assets` fills the asset-by-asset block,
/// `sigma_variance` the variance-by-variance block and `sigma_cross` both
/// off-diagonal blocks. Unset fields take per-model defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub seed: u64,
    /// Appreciation rates; the discount rate when unset.
    pub mu: Option<Range>,
    pub s0: Option<Range>,
    pub sigma_assets: Option<Range>,
    pub sigma_cross: Option<Range>,
    pub sigma_variance: Option<Range>,
    pub mean_level: Option<Range>,
    pub speed: Option<Range>,
    pub v0: Option<Range>,
    pub max_retries: Option<usize>,
}

impl Recipe {
    /// The recipe with every unset range replaced by the default for `kind`.
    pub fn resolved(&self, kind: ModelKind, rate: f64) -> Recipe {
        let r = |lo, hi| Some(Range { lo, hi });
        let (sigma_assets, sigma_variance, mean_level, speed, v0) = match kind {
            ModelKind::BlackScholes => (r(0.0, 0.13), None, None, None, None),
            ModelKind::Heston => (r(0.0, 0.18), r(0.0, 0.6), r(0.8, 1.2), r(1.0, 3.0), r(0.8, 1.2)),
            ModelKind::ThreeHalves => (r(0.0, 0.18), r(0.0, 0.6), r(0.8, 1.2), r(1.0, 3.0), r(0.8, 1.2)),
            ModelKind::SteinStein => (r(0.0, 0.18), r(0.0, 0.1), r(0.8, 1.2), r(1.0, 3.0), r(0.8, 1.2)),
        };
        let sv = kind.has_volatility();
        Recipe {
            seed: self.seed,
            mu: self.mu.or(r(rate, rate)),
            s0: self.s0.or(r(80.0, 120.0)),
            sigma_assets: self.sigma_assets.or(sigma_assets),
            sigma_cross: self.sigma_cross.or(if sv { r(0.0, 0.0) } else { None }),
            sigma_variance: self.sigma_variance.or(sigma_variance),
            mean_level: self.mean_level.or(mean_level),
            speed: self.speed.or(speed),
            v0: self.v0.or(v0),
            max_retries: self.max_retries.or(Some(10_000)),
        }
    }
}

fn required(range: Option<Range>, name: &str) -> Result<Range> {
    range.ok_or_else(|| Error::Config(format!("recipe needs `{name}` for this model")))
}

/// Draws a model from `recipe`.
///
/// Feller (Heston) and non-explosion (3/2) conditions are enforced per asset
/// by redrawing that asset's `m_k`, `Θ_kk` and variance row of `Σ`. Fails
/// with [`Error::SamplingExhausted`] once `max_retries` redraws are used.
pub fn sample_parameters(
    kind: ModelKind,
    n_assets: usize,
    rate: f64,
    recipe: &Recipe,
) -> Result<ModelSpec> {
    if n_assets == 0 {
        return Err(Error::Config("n_assets must be positive".into()));
    }
    let recipe = recipe.resolved(kind, rate);
    let mut rng = substream(recipe.seed, Domain::Params, 0);
    let n = n_assets;
    let d = kind.driver_dim(n);
    let draw_n = |range: Range, rng: &mut Rng| (0..n).map(|_| range.draw(rng)).collect::<Vec<_>>();

    let mu = draw_n(required(recipe.mu, "mu")?, &mut rng);
    let s0 = draw_n(required(recipe.s0, "s0")?, &mut rng);
    let assets = required(recipe.sigma_assets, "sigma_assets")?;
    let mut sigma = Matrix::zeros(d, d);
    if !kind.has_volatility() {
        for i in 0..n {
            for j in 0..n {
                sigma.set(i, j, assets.draw(&mut rng));
            }
        }
        return finish(ModelSpec {
            kind,
            mu,
            mean_level: vec![],
            speed: vec![],
            sigma,
            s0,
            v0: vec![],
            rate,
        });
    }

    let cross = required(recipe.sigma_cross, "sigma_cross")?;
    let variance = required(recipe.sigma_variance, "sigma_variance")?;
    let level = required(recipe.mean_level, "mean_level")?;
    let speed_range = required(recipe.speed, "speed")?;
    let v0 = draw_n(required(recipe.v0, "v0")?, &mut rng);
    for i in 0..n {
        for j in 0..d {
            sigma.set(i, j, if j < n { assets } else { cross }.draw(&mut rng));
        }
    }
    let budget = recipe.max_retries.unwrap_or(0);
    let mut retries = 0;
    let mut mean_level = vec![0.0; n];
    let mut speed = vec![0.0; n];
    for k in 0..n {
        loop {
            let row = n + k;
            for j in 0..d {
                sigma.set(row, j, if j < n { cross } else { variance }.draw(&mut rng));
            }
            mean_level[k] = level.draw(&mut rng);
            speed[k] = speed_range.draw(&mut rng);
            let r = sigma.row(row);
            let row_sq = dot(r, r);
            let binding = match kind {
                ModelKind::Heston if 2.0 * speed[k] * mean_level[k] < row_sq => Some("feller"),
                ModelKind::ThreeHalves if speed[k] < -row_sq / 2.0 => Some("non_explosion"),
                _ if row_sq == 0.0 => Some("nonzero_sigma_row"),
                _ => None,
            };
            match binding {
                None => break,
                Some(constraint) if retries >= budget => {
                    return Err(Error::SamplingExhausted {
                        retries,
                        constraint: constraint.into(),
                    })
                }
                Some(_) => retries += 1,
            }
        }
    }
    finish(ModelSpec {
        kind,
        mu,
        mean_level,
        speed,
        sigma,
        s0,
        v0,
        rate,
    })
}

fn finish(spec: ModelSpec) -> Result<ModelSpec> {
    spec.ensure_valid()?;
    Ok(spec)
}

/// Explicit model parameters; same layout as [`ModelSpec`] without kind and rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub mu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mean_level: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub speed: Vec<f64>,
    pub s0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub v0: Vec<f64>,
    pub sigma: Matrix,
}

impl ModelParams {
    fn from_spec(spec: &ModelSpec) -> Self {
        ModelParams {
            mu: spec.mu.clone(),
            mean_level: spec.mean_level.clone(),
            speed: spec.speed.clone(),
            s0: spec.s0.clone(),
            v0: spec.v0.clone(),
            sigma: spec.sigma.clone(),
        }
    }

    fn to_spec(&self, kind: ModelKind, rate: f64) -> ModelSpec {
        ModelSpec {
            kind,
            mu: self.mu.clone(),
            mean_level: self.mean_level.clone(),
            speed: self.speed.clone(),
            sigma: self.sigma.clone(),
            s0: self.s0.clone(),
            v0: self.v0.clone(),
            rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: ModelKind,
    /// Number of assets; defaults to a driver of dimension 10.
    pub n_assets: Option<usize>,
    #[serde(default = "default_rate")]
    pub rate: f64,
    pub recipe: Option<Recipe>,
    /// Explicit parameters; take precedence over `recipe`.
    pub params: Option<ModelParams>,
}

fn default_rate() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `w_k ∝ μ_k / |σ_k|`.
    #[default]
    MuOverSigma,
    Equal,
}

/// Payoff definition. Strike and barrier levels, when unset, are derived from
/// the initial basket value `B₀ = ⟨w, s₀⟩`: `K = moneyness · B₀ · e^{ru}` and
/// `(L, U) = barrier_factors · B₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayoffBlock {
    pub kind: PayoffKind,
    pub moneyness: f64,
    pub strike: Option<f64>,
    pub weight_rule: WeightRule,
    pub weights: Option<Vec<f64>>,
    pub averaging: Averaging,
    pub barrier_factors: Option<[f64; 2]>,
    pub barrier: Option<Barrier>,
}

impl Default for PayoffBlock {
    fn default() -> Self {
        PayoffBlock {
            kind: PayoffKind::AsianBasketCall,
            moneyness: 1.3,
            strike: None,
            weight_rule: WeightRule::MuOverSigma,
            weights: None,
            averaging: Averaging::Trapezoidal,
            barrier_factors: None,
            barrier: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub horizon: f64,
    pub dt: f64,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock {
            horizon: 1.0,
            dt: 1.0 / 252.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationBlock {
    /// Sample sizes, one comparison row each.
    pub sizes: Vec<usize>,
    /// Row `i` uses independent child seeds of this for plain and IS runs.
    pub seed: u64,
}

impl Default for EstimationBlock {
    fn default() -> Self {
        EstimationBlock {
            sizes: vec![5_000, 20_000, 100_000],
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub formats: Vec<Format>,
    /// Number of plain paths written to `paths.csv`; none when zero.
    pub dump_paths: usize,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            formats: vec![Format::Csv, Format::Json],
            dump_paths: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub model: ModelBlock,
    #[serde(default)]
    pub payoff: PayoffBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub estimation: EstimationBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn default_schema() -> String {
    SCHEMA.into()
}

/// A resolved config with the objects it describes.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub model: ModelSpec,
    pub payoff: PayoffSpec,
    /// Grid for pricing.
    pub grid: TimeGrid,
    /// Grid for training paths.
    pub train_grid: TimeGrid,
}

impl Resolved {
    pub fn covariation(&self) -> Result<CovariationSpec> {
        self.model.covariation(self.grid.clone())
    }

    pub fn train_covariation(&self) -> Result<CovariationSpec> {
        self.model.covariation(self.train_grid.clone())
    }
}

impl RunConfig {
    /// A config for `kind` with every other block at its default.
    pub fn for_model(kind: ModelKind, seed: u64) -> Self {
        RunConfig {
            schema: SCHEMA.into(),
            model: ModelBlock {
                kind,
                n_assets: None,
                rate: default_rate(),
                recipe: Some(Recipe {
                    seed,
                    ..Recipe::default()
                }),
                params: None,
            },
            payoff: PayoffBlock::default(),
            grid: GridBlock::default(),
            training: TrainConfig::default(),
            estimation: EstimationBlock::default(),
            output: OutputBlock::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if config.schema != SCHEMA {
            return Err(Error::Config(format!(
                "unknown schema `{}`, expected `{SCHEMA}`",
                config.schema
            )));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets the training and estimation seeds. The parameter recipe seed is
    /// left alone so the model stays fixed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.training.seed = seed;
        self.estimation.seed = seed;
        self
    }

    /// Fills every defaulted field and builds the model, payoff and grids.
    pub fn resolve(&self) -> Result<Resolved> {
        let mut config = self.clone();
        let kind = config.model.kind;
        let rate = config.model.rate;
        if !rate.is_finite() {
            return Err(Error::Config("rate must be finite".into()));
        }
        let n = match (config.model.n_assets, &config.model.params) {
            (Some(n), _) => n,
            (None, Some(p)) => p.mu.len(),
            (None, None) if kind.has_volatility() => 5,
            (None, None) => 10,
        };
        config.model.n_assets = Some(n);

        let model = match (&config.model.params, &config.model.recipe) {
            (Some(p), _) => {
                let spec = p.to_spec(kind, rate);
                spec.ensure_valid()?;
                spec
            }
            (None, Some(recipe)) => {
                let spec = sample_parameters(kind, n, rate, recipe)?;
                config.model.recipe = Some(recipe.resolved(kind, rate));
                config.model.params = Some(ModelParams::from_spec(&spec));
                spec
            }
            (None, None) => {
                return Err(Error::Config("model needs `params` or `recipe`".into()));
            }
        };
        if model.n_assets() != n {
            return Err(Error::Validation(vec![Violation::Dimension {
                field: "mu",
                expected: n,
                actual: model.n_assets(),
            }]));
        }

        let grid = TimeGrid::with_step(config.grid.horizon, config.grid.dt)?;
        let train_grid = TimeGrid::with_step(config.grid.horizon, config.training.dt)?;
        config.training.validate()?;
        config.training.hidden = Some(config.training.hidden.unwrap_or(model.driver_dim()));
        if config.estimation.sizes.is_empty() || config.estimation.sizes.contains(&0) {
            return Err(Error::Config("estimation sizes must be non-empty and positive".into()));
        }

        let p = &mut config.payoff;
        let weights = match &p.weights {
            Some(w) => w.clone(),
            None => match p.weight_rule {
                WeightRule::MuOverSigma => basket_weights(&model.mu, &model.sigma)?,
                WeightRule::Equal => vec![1.0 / n as f64; n],
            },
        };
        if weights.len() != n {
            return Err(Error::Config(format!(
                "{} weights for {n} assets",
                weights.len()
            )));
        }
        let basket0 = dot(&weights, &model.s0);
        let strike = match p.strike {
            Some(k) => k,
            None => {
                if !(p.moneyness > 0.0) {
                    return Err(Error::Config("moneyness must be positive".into()));
                }
                p.moneyness * basket0 * (rate * grid.horizon()).exp()
            }
        };
        let barrier = match (p.kind, p.barrier, p.barrier_factors) {
            (PayoffKind::AsianBasketCall, None, None) => None,
            (PayoffKind::AsianBasketCall, _, _) => {
                return Err(Error::Config("asian_basket_call takes no barrier".into()));
            }
            (PayoffKind::AsianBasketKnockout, Some(b), _) => Some(b),
            (PayoffKind::AsianBasketKnockout, None, Some([lo, hi])) => Some(Barrier {
                lower: lo * basket0,
                upper: hi * basket0,
            }),
            (PayoffKind::AsianBasketKnockout, None, None) => {
                return Err(Error::Config(
                    "asian_basket_knockout needs `barrier` or `barrier_factors`".into(),
                ));
            }
        };
        p.weights = Some(weights.clone());
        p.strike = Some(strike);
        p.barrier = barrier;
        let payoff =
            PayoffSpec::new(p.kind, weights, strike, barrier, Averaging::default())?.with_averaging(p.averaging);

        Ok(Resolved {
            config,
            model,
            payoff,
            grid,
            train_grid,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_seed_gives_identical_spec() {
        for kind in [
            ModelKind::BlackScholes,
            ModelKind::Heston,
            ModelKind::ThreeHalves,
            ModelKind::SteinStein,
        ] {
            let recipe = Recipe {
                seed: 42,
                ..Recipe::default()
            };
            let a = sample_parameters(kind, 3, 0.05, &recipe).unwrap();
            let b = sample_parameters(kind, 3, 0.05, &recipe).unwrap();
            assert_eq!(a, b);
            let c = sample_parameters(kind, 3, 0.05, &Recipe { seed: 43, ..recipe }).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn heston_samples_always_validate() {
        // Wide variance rows make Feller bind often.
        for seed in 0..10_000 {
            let recipe = Recipe {
                seed,
                sigma_variance: Some(Range::new(0.0, 1.0).unwrap()),
                ..Recipe::default()
            };
            let spec = sample_parameters(ModelKind::Heston, 5, 0.05, &recipe).unwrap();
            assert!(spec.validate().is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn degenerate_recipe_is_the_midpoint() {
        let p = |x| Some(Range::point(x));
        let recipe = Recipe {
            seed: 9,
            mu: p(0.03),
            s0: p(1.5),
            sigma_assets: p(0.2),
            sigma_cross: p(0.0),
            sigma_variance: p(0.3),
            mean_level: p(0.05),
            speed: p(2.0),
            v0: p(0.05),
            max_retries: Some(0),
        };
        let spec = sample_parameters(ModelKind::Heston, 2, 0.05, &recipe).unwrap();
        assert_eq!(spec.mu, vec![0.03; 2]);
        assert_eq!(spec.s0, vec![1.5; 2]);
        assert_eq!(spec.mean_level, vec![0.05; 2]);
        assert_eq!(spec.speed, vec![2.0; 2]);
        assert_eq!(spec.v0, vec![0.05; 2]);
        assert_eq!(spec.sigma.get(0, 1), 0.2);
        assert_eq!(spec.sigma.get(0, 2), 0.0);
        assert_eq!(spec.sigma.get(3, 3), 0.3);
    }

    #[test]
    fn impossible_feller_names_constraint() {
        let recipe = Recipe {
            seed: 1,
            sigma_variance: Some(Range::point(1.0)),
            mean_level: Some(Range::point(0.01)),
            speed: Some(Range::point(1.0)),
            max_retries: Some(50),
            ..Recipe::default()
        };
        match sample_parameters(ModelKind::Heston, 2, 0.05, &recipe) {
            Err(Error::SamplingExhausted { retries, constraint }) => {
                assert_eq!(retries, 50);
                assert_eq!(constraint, "feller");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_range_rejected() {
        let text = format!(
            "schema = \"{SCHEMA}\"\n[model]\nkind = \"black_scholes\"\n[model.recipe]\nseed = 1\ns0 = [2.0, 1.0]\n"
        );
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_schema_rejected() {
        let text = "schema = \"other/v9\"\n[model]\nkind = \"black_scholes\"\n";
        assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))));
    }

    #[test]
    fn strike_rule() {
        let mut config = RunConfig::for_model(ModelKind::BlackScholes, 3);
        config.model.n_assets = Some(4);
        let r = config.resolve().unwrap();
        let w = r.payoff.weights();
        let b0: f64 = w.iter().zip(&r.model.s0).map(|(w, s)| w * s).sum();
        let want = 1.3 * b0 * 0.05f64.exp();
        assert!((r.payoff.strike() - want).abs() <= 1e-14 * want);
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn knockout_needs_barrier() {
        let mut config = RunConfig::for_model(ModelKind::BlackScholes, 3);
        config.payoff.kind = PayoffKind::AsianBasketKnockout;
        assert!(matches!(config.resolve(), Err(Error::Config(_))));
        config.payoff.barrier_factors = Some([0.8, 1.6]);
        let r = config.resolve().unwrap();
        let b = r.payoff.barrier().unwrap();
        assert!(b.lower < b.upper);
    }

    #[test]
    fn feller_violation_is_validation_error() {
        let config = RunConfig::for_model(ModelKind::Heston, 5).resolve().unwrap();
        let mut bad = config.config.clone();
        if let Some(p) = bad.model.params.as_mut() {
            p.mean_level[0] = 1e-6;
        }
        let err = bad.resolve().unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn resolved_config_is_a_fixed_point(seed in 0u64..1000, kind in 0usize..4, knockout: bool) {
            let kind = [
                ModelKind::BlackScholes,
                ModelKind::Heston,
                ModelKind::ThreeHalves,
                ModelKind::SteinStein,
            ][kind];
            let mut config = RunConfig::for_model(kind, seed);
            if knockout {
                config.payoff.kind = PayoffKind::AsianBasketKnockout;
                config.payoff.barrier_factors = Some([0.8, 1.7]);
            }
            let once = config.resolve().unwrap();
            let text = once.config.to_toml().unwrap();
            let parsed = RunConfig::from_toml(&text).unwrap();
            prop_assert_eq!(&parsed, &once.config);
            let twice = parsed.resolve().unwrap();
            prop_assert_eq!(&twice.config, &once.config);
            prop_assert_eq!(twice.model, once.model);
            prop_assert_eq!(twice.payoff, once.payoff);
            prop_assert_eq!(twice.config.to_toml().unwrap(), text);
        }
    }
}
