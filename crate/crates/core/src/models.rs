//! Euler–Maruyama simulation of the multivariate asset models.
//!
//! All models are driven by `M = ΣB`. Black–Scholes uses `d = n`; the
//! stochastic volatility models use `d = 2n` with the first `n` coordinates
//! driving the assets and the last `n` the volatility factors.
//!
//! Under the shifted measure the same Gaussian increments are moved by the
//! finite-variation part of the drift, `ΔM_k = Σz_k√Δμ_k + π f_k Δμ_k`, and
//! each path carries `log (E(fᵀ•M)⁻¹)_u` evaluated on the shifted increments.

use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ffn::ShallowNet;
use crate::gaussian::{
    cameron_martin_map, fill_path_increments, log_likelihood_inverse, CovariationSpec,
    DriftEvaluation, GridFunction, TimeGrid,
};
use crate::linalg::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BlackScholes,
    Heston,
    ThreeHalves,
    SteinStein,
}

impl ModelKind {
    pub fn has_volatility(self) -> bool {
        !matches!(self, ModelKind::BlackScholes)
    }

    /// Driver dimension for `n` assets.
    pub fn driver_dim(self, n_assets: usize) -> usize {
        if self.has_volatility() {
            2 * n_assets
        } else {
            n_assets
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::BlackScholes => "black_scholes",
            ModelKind::Heston => "heston",
            ModelKind::ThreeHalves => "three_halves",
            ModelKind::SteinStein => "stein_stein",
        })
    }
}

/// Parameters of one asset model. `speed` holds the diagonal of `Θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Appreciation rates `μ`, one per asset.
    pub mu: Vec<f64>,
    #[serde(default)]
    pub mean_level: Vec<f64>,
    #[serde(default)]
    pub speed: Vec<f64>,
    pub sigma: Matrix,
    pub s0: Vec<f64>,
    #[serde(default)]
    pub v0: Vec<f64>,
    /// Discount rate; used only for discounting.
    pub rate: f64,
}

/// A structural constraint a [`ModelSpec`] does not satisfy.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Dimension {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    NonFinite {
        field: &'static str,
    },
    NoAssets,
    ZeroSigmaRow {
        row: usize,
    },
    NonPositiveSpot {
        asset: usize,
        value: f64,
    },
    NonPositiveVariance {
        asset: usize,
        value: f64,
    },
    /// `2Θ_kk m_k ≥ ⟨σ_{k+n}, σ_{k+n}⟩` fails.
    Feller {
        asset: usize,
        lhs: f64,
        rhs: f64,
    },
    /// `Θ_kk ≥ −⟨σ_{k+n}, σ_{k+n}⟩/2` fails.
    Explosion {
        asset: usize,
        speed: f64,
        bound: f64,
    },
}

impl Violation {
    /// Short name of the violated constraint.
    pub fn constraint(&self) -> &'static str {
        match self {
            Violation::Dimension { .. } => "dimension",
            Violation::NonFinite { .. } => "finite",
            Violation::NoAssets => "assets",
            Violation::ZeroSigmaRow { .. } => "sigma_row",
            Violation::NonPositiveSpot { .. } => "spot",
            Violation::NonPositiveVariance { .. } => "variance",
            Violation::Feller { .. } => "feller",
            Violation::Explosion { .. } => "non_explosion",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension {
                field,
                expected,
                actual,
            } => write!(f, "{field}: expected length {expected}, got {actual}"),
            Violation::NonFinite { field } => write!(f, "{field}: non-finite entry"),
            Violation::NoAssets => write!(f, "no assets"),
            Violation::ZeroSigmaRow { row } => write!(f, "sigma row {row} is zero"),
            Violation::NonPositiveSpot { asset, value } => {
                write!(f, "s0[{asset}] = {value} is not positive")
            }
            Violation::NonPositiveVariance { asset, value } => {
                write!(f, "v0[{asset}] = {value} is not positive")
            }
            Violation::Feller { asset, lhs, rhs } => {
                write!(f, "Feller condition fails for asset {asset}: 2Θm = {lhs} < |σ|² = {rhs}")
            }
            Violation::Explosion {
                asset,
                speed,
                bound,
            } => write!(
                f,
                "non-explosion condition fails for asset {asset}: Θ = {speed} < {bound}"
            ),
        }
    }
}

impl ModelSpec {
    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    pub fn driver_dim(&self) -> usize {
        self.kind.driver_dim(self.n_assets())
    }

    /// Width of the simulated state `X = S` or `X = (S, V)`.
    pub fn state_dim(&self) -> usize {
        self.driver_dim()
    }

    /// Every violated structural invariant; empty when the spec is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.n_assets();
        if n == 0 {
            out.push(Violation::NoAssets);
            return out;
        }
        let d = self.driver_dim();
        let mut dim = |field, expected, actual| {
            if expected != actual {
                out.push(Violation::Dimension {
                    field,
                    expected,
                    actual,
                });
                false
            } else {
                true
            }
        };
        let mut shapes_ok = dim("s0", n, self.s0.len());
        shapes_ok &= dim("sigma rows", d, self.sigma.rows());
        shapes_ok &= dim("sigma cols", d, self.sigma.cols());
        if self.kind.has_volatility() {
            shapes_ok &= dim("mean_level", n, self.mean_level.len());
            shapes_ok &= dim("speed", n, self.speed.len());
            shapes_ok &= dim("v0", n, self.v0.len());
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        for (field, ok) in [
            ("mu", finite(&self.mu)),
            ("mean_level", finite(&self.mean_level)),
            ("speed", finite(&self.speed)),
            ("sigma", self.sigma.is_finite()),
            ("s0", finite(&self.s0)),
            ("v0", finite(&self.v0)),
            ("rate", self.rate.is_finite()),
        ] {
            if !ok {
                out.push(Violation::NonFinite { field });
            }
        }
        if !shapes_ok {
            return out;
        }
        for row in 0..d {
            if self.sigma.row(row).iter().all(|v| *v == 0.0) {
                out.push(Violation::ZeroSigmaRow { row });
            }
        }
        for (asset, &value) in self.s0.iter().enumerate() {
            if !(value > 0.0) {
                out.push(Violation::NonPositiveSpot { asset, value });
            }
        }
        match self.kind {
            ModelKind::BlackScholes | ModelKind::SteinStein => {}
            ModelKind::Heston => {
                for k in 0..n {
                    self.check_positive_v0(k, &mut out);
                    let lhs = 2.0 * self.speed[k] * self.mean_level[k];
                    let rhs = self.vol_row_sq(k);
                    if lhs < rhs {
                        out.push(Violation::Feller { asset: k, lhs, rhs });
                    }
                }
            }
            ModelKind::ThreeHalves => {
                for k in 0..n {
                    self.check_positive_v0(k, &mut out);
                    let bound = -self.vol_row_sq(k) / 2.0;
                    if self.speed[k] < bound {
                        out.push(Violation::Explosion {
                            asset: k,
                            speed: self.speed[k],
                            bound,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    fn check_positive_v0(&self, k: usize, out: &mut Vec<Violation>) {
        if !(self.v0[k] > 0.0) {
            out.push(Violation::NonPositiveVariance {
                asset: k,
                value: self.v0[k],
            });
        }
    }

    /// `⟨σ_{k+n}, σ_{k+n}⟩`.
    fn vol_row_sq(&self, k: usize) -> f64 {
        let r = self.sigma.row(k + self.n_assets());
        dot(r, r)
    }

    /// Initial state `x₀`.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut x = self.s0.clone();
        if self.kind.has_volatility() {
            x.extend_from_slice(&self.v0);
        }
        x
    }

    pub fn covariation(&self, grid: TimeGrid) -> Result<CovariationSpec> {
        CovariationSpec::new(self.sigma.clone(), grid)
    }

    /// One Euler step of the state in place, given the driver increment.
    #[inline]
    fn step(&self, x: &mut [f64], dm: &[f64], dt: f64) {
        let n = self.n_assets();
        match self.kind {
            ModelKind::BlackScholes => {
                for i in 0..n {
                    let s = x[i];
                    x[i] = s + self.mu[i] * s * dt + s * dm[i];
                }
            }
            ModelKind::Heston => {
                let (s, v) = x.split_at_mut(n);
                let (dm1, dm2) = dm.split_at(n);
                for i in 0..n {
                    let vp = v[i].max(0.0);
                    let vol = vp.sqrt();
                    s[i] += self.mu[i] * s[i] * dt + s[i] * vol * dm1[i];
                    v[i] += self.speed[i] * (self.mean_level[i] - vp) * dt + vol * dm2[i];
                }
            }
            ModelKind::ThreeHalves => {
                let (s, v) = x.split_at_mut(n);
                let (dm1, dm2) = dm.split_at(n);
                for i in 0..n {
                    let vp = v[i].max(0.0);
                    let sq = vp.sqrt();
                    s[i] += self.mu[i] * s[i] * dt + s[i] * sq * dm1[i];
                    v[i] += self.speed[i] * vp * (self.mean_level[i] - vp) * dt + vp * sq * dm2[i];
                }
            }
            ModelKind::SteinStein => {
                let (s, v) = x.split_at_mut(n);
                let (dm1, dm2) = dm.split_at(n);
                for i in 0..n {
                    let vol = v[i];
                    s[i] += self.mu[i] * s[i] * dt + s[i] * vol * dm1[i];
                    v[i] += self.speed[i] * (self.mean_level[i] - vol) * dt + dm2[i];
                }
            }
        }
    }
}

/// Splits one driver increment of length `2n` into the asset block and the
/// volatility block.
pub fn split_driver(dm: &[f64], n: usize) -> Result<(&[f64], &[f64])> {
    if dm.len() != 2 * n {
        return Err(Error::dims("driver increment (2n)", 2 * n, dm.len()));
    }
    Ok(dm.split_at(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    P,
    #[serde(rename = "P_h")]
    Ph,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::P => "P",
            Measure::Ph => "P_h",
        })
    }
}

/// Source of the martingale part of the driver increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Noise {
    #[default]
    Gaussian,
    /// Zero martingale increments; only the drift shift remains. Test hook.
    Frozen,
}

/// Trajectories laid out `[path][node][state]` and increments
/// `[path][step][coordinate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    n_paths: usize,
    n_steps: usize,
    n_state: usize,
    n_assets: usize,
    d: usize,
    states: Vec<f64>,
    increments: Vec<f64>,
    log_inv_likelihood: Vec<f64>,
    measure: Measure,
}

impl PathBatch {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn path(&self, p: usize) -> PathView<'_> {
        let len = (self.n_steps + 1) * self.n_state;
        PathView {
            states: &self.states[p * len..(p + 1) * len],
            n_state: self.n_state,
            n_assets: self.n_assets,
        }
    }

    pub fn increments(&self, p: usize) -> &[f64] {
        let len = self.n_steps * self.d;
        &self.increments[p * len..(p + 1) * len]
    }

    pub fn log_inv_likelihood(&self) -> &[f64] {
        &self.log_inv_likelihood
    }

    /// CSV rows `path,step,time,x0,…`.
    pub fn write_csv<W: Write>(&self, grid: &TimeGrid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path".to_string(), "step".into(), "time".into()];
        header.extend((0..self.n_state).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for p in 0..self.n_paths {
            let view = self.path(p);
            for k in 0..=self.n_steps {
                let mut rec = vec![p.to_string(), k.to_string(), grid.times()[k].to_string()];
                rec.extend(view.state(k).iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One trajectory.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    states: &'a [f64],
    n_state: usize,
    n_assets: usize,
}

impl<'a> PathView<'a> {
    pub fn new(states: &'a [f64], n_state: usize, n_assets: usize) -> Self {
        PathView {
            states,
            n_state,
            n_assets,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.states.len() / self.n_state
    }

    #[inline]
    pub fn state(&self, k: usize) -> &'a [f64] {
        &self.states[k * self.n_state..(k + 1) * self.n_state]
    }

    /// Asset block `S_{t_k}`.
    #[inline]
    pub fn assets(&self, k: usize) -> &'a [f64] {
        &self.state(k)[..self.n_assets]
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }
}

/// Reusable per-thread simulator for one model, grid and optional drift.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    model: &'a ModelSpec,
    cov: &'a CovariationSpec,
    drift: Option<DriftEvaluation>,
    noise: Noise,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a ModelSpec, cov: &'a CovariationSpec) -> Result<Self> {
        model.ensure_valid()?;
        if cov.d() != model.driver_dim() {
            return Err(Error::dims("covariation dimension", model.driver_dim(), cov.d()));
        }
        Ok(Simulator {
            model,
            cov,
            drift: None,
            noise: Noise::Gaussian,
        })
    }

    /// Simulate under `P_h` for the drift generated by `net`.
    pub fn with_drift(mut self, net: &ShallowNet) -> Result<Self> {
        self.drift = Some(drift_from_net(net, self.cov)?);
        Ok(self)
    }

    pub fn with_drift_evaluation(mut self, drift: DriftEvaluation) -> Result<Self> {
        if drift.d() != self.cov.d() || drift.n_steps() != self.cov.grid().n_steps() {
            return Err(Error::dims("drift evaluation", self.cov.d(), drift.d()));
        }
        self.drift = Some(drift);
        Ok(self)
    }

    pub fn with_noise(mut self, noise: Noise) -> Self {
        self.noise = noise;
        self
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    pub fn covariation(&self) -> &CovariationSpec {
        self.cov
    }

    pub fn drift(&self) -> Option<&DriftEvaluation> {
        self.drift.as_ref()
    }

    pub fn measure(&self) -> Measure {
        if self.drift.is_some() {
            Measure::Ph
        } else {
            Measure::P
        }
    }

    pub fn scratch(&self) -> PathScratch {
        let n = self.cov.grid().n_steps();
        let d = self.cov.d();
        PathScratch {
            z: vec![0.0; d],
            increments: vec![0.0; n * d],
            states: vec![0.0; (n + 1) * self.model.state_dim()],
        }
    }

    /// Simulates one path into `scratch` and returns its log inverse
    /// likelihood (0 under `P`). `path` labels errors.
    pub fn simulate_path<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        scratch: &mut PathScratch,
        path: usize,
    ) -> Result<f64> {
        let d = self.cov.d();
        let grid = self.cov.grid();
        let n = grid.n_steps();
        match self.noise {
            Noise::Gaussian => {
                fill_path_increments(self.cov, rng, &mut scratch.z, &mut scratch.increments)
            }
            Noise::Frozen => scratch.increments.fill(0.0),
        }
        let log_w = match &self.drift {
            Some(drift) => {
                for k in 0..n {
                    let shift = drift.increment(k);
                    for (v, s) in scratch.increments[k * d..(k + 1) * d].iter_mut().zip(shift) {
                        *v += s;
                    }
                }
                log_likelihood_inverse(drift, &scratch.increments)?
            }
            None => 0.0,
        };
        let m = self.model.state_dim();
        let x0 = self.model.initial_state();
        scratch.states[..m].copy_from_slice(&x0);
        for k in 0..n {
            let (done, rest) = scratch.states.split_at_mut((k + 1) * m);
            let next = &mut rest[..m];
            next.copy_from_slice(&done[k * m..]);
            self.model
                .step(next, &scratch.increments[k * d..(k + 1) * d], grid.dt(k));
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { path, step: k + 1 });
            }
        }
        Ok(log_w)
    }
}

/// Buffers for one path.
#[derive(Debug, Clone)]
pub struct PathScratch {
    z: Vec<f64>,
    pub(crate) increments: Vec<f64>,
    pub(crate) states: Vec<f64>,
}

impl PathScratch {
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }
}

/// Evaluates `net` at the left endpoints and maps it through `J`.
pub fn drift_from_net(net: &ShallowNet, cov: &CovariationSpec) -> Result<DriftEvaluation> {
    if net.output() != cov.d() {
        return Err(Error::dims("network output width", cov.d(), net.output()));
    }
    let f = GridFunction::sample(cov.grid(), cov.d(), |t, out| net.forward_into(t, out));
    cameron_martin_map(&f, cov)
}

/// Simulates `n_paths` paths sequentially from one random stream.
pub fn simulate<R: Rng + ?Sized>(
    model: &ModelSpec,
    cov: &CovariationSpec,
    drift: Option<&ShallowNet>,
    rng: &mut R,
    n_paths: usize,
) -> Result<PathBatch> {
    let mut sim = Simulator::new(model, cov)?;
    if let Some(net) = drift {
        sim = sim.with_drift(net)?;
    }
    simulate_with(&sim, rng, n_paths)
}

pub fn simulate_with<R: Rng + ?Sized>(
    sim: &Simulator<'_>,
    rng: &mut R,
    n_paths: usize,
) -> Result<PathBatch> {
    let n_steps = sim.cov.grid().n_steps();
    let d = sim.cov.d();
    let n_state = sim.model.state_dim();
    let mut scratch = sim.scratch();
    let mut batch = PathBatch {
        n_paths,
        n_steps,
        n_state,
        n_assets: sim.model.n_assets(),
        d,
        states: Vec::with_capacity(n_paths * (n_steps + 1) * n_state),
        increments: Vec::with_capacity(n_paths * n_steps * d),
        log_inv_likelihood: Vec::with_capacity(n_paths),
        measure: sim.measure(),
    };
    for p in 0..n_paths {
        let lw = sim.simulate_path(rng, &mut scratch, p)?;
        batch.states.extend_from_slice(&scratch.states);
        batch.increments.extend_from_slice(&scratch.increments);
        batch.log_inv_likelihood.push(lw);
    }
    Ok(batch)
}
