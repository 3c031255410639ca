//! Discretized covariation structure of the driving Gaussian martingale `M`.
//!
//! The quadratic covariation is factored as `[M]_t = ∫₀ᵗ π dμ` with a matrix
//! density `π = ΣΣᵀ` and a clock measure `μ`. On a grid the clock is stored as
//! per-step masses `Δμ_k`, so a Lebesgue clock is just `Δμ_k = Δt`.
//!
//! Drift functions are sampled at left endpoints: `f_k = f(t_k)` acts on the
//! increment over `(t_k, t_{k+1}]`. This is the Itô convention used for every
//! stochastic integral in the crate.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, CompensatedSum, Matrix};

/// Time nodes `0 = t₀ < … < t_n = u` with clock masses per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    masses: Vec<f64>,
    sqrt_masses: Vec<f64>,
}

impl TimeGrid {
    /// Equally spaced grid with the Lebesgue clock.
    pub fn uniform(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be positive and finite, got {horizon}"),
            });
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                reason: "must be positive".into(),
            });
        }
        let mut times: Vec<f64> = (0..=n_steps)
            .map(|k| horizon * k as f64 / n_steps as f64)
            .collect();
        times[n_steps] = horizon;
        let masses: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        Self::new(times, masses)
    }

    /// Uniform grid whose step is `dt` (rounded to the nearest whole number of
    /// steps over the horizon).
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive and finite, got {dt}"),
            });
        }
        let n = (horizon / dt).round().max(1.0) as usize;
        Self::uniform(horizon, n)
    }

    /// Arbitrary nodes and clock masses. The masses may be zero on some
    /// intervals but must have positive total.
    pub fn new(times: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "times",
                reason: "need at least two nodes".into(),
            });
        }
        if masses.len() != times.len() - 1 {
            return Err(Error::dims("clock masses", times.len() - 1, masses.len()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidParameter {
                name: "times",
                reason: "first node must be 0".into(),
            });
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter {
                name: "times",
                reason: "nodes must be finite and strictly increasing".into(),
            });
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "masses",
                reason: "clock masses must be finite and non-negative".into(),
            });
        }
        if masses.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "masses",
                reason: "total clock mass must be positive".into(),
            });
        }
        let sqrt_masses = masses.iter().map(|m| m.sqrt()).collect();
        Ok(TimeGrid {
            times,
            masses,
            sqrt_masses,
        })
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn n_steps(&self) -> usize {
        self.masses.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Left endpoints `t₀ … t_{n−1}`.
    pub fn left_times(&self) -> &[f64] {
        &self.times[..self.n_steps()]
    }

    #[inline]
    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    #[inline]
    pub fn mass(&self, k: usize) -> f64 {
        self.masses[k]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    #[inline]
    pub(crate) fn sqrt_mass(&self, k: usize) -> f64 {
        self.sqrt_masses[k]
    }
}

/// Diffusion matrix `Σ`, its Gram matrix `π = ΣΣᵀ` and the grid they live on.
#[derive(Debug, Clone)]
pub struct CovariationSpec {
    sigma: Matrix,
    pi: Matrix,
    pi_steps: Option<Vec<Matrix>>,
    grid: TimeGrid,
}

impl CovariationSpec {
    pub fn new(sigma: Matrix, grid: TimeGrid) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::dims("diffusion matrix columns", sigma.rows(), sigma.cols()));
        }
        if !sigma.is_finite() {
            return Err(Error::NonFinite("diffusion matrix"));
        }
        if let Some(i) = (0..sigma.rows()).find(|&i| sigma.row(i).iter().all(|v| *v == 0.0)) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("row {i} is the zero vector"),
            });
        }
        let pi = sigma.gram();
        Ok(CovariationSpec {
            sigma,
            pi,
            pi_steps: None,
            grid,
        })
    }

    /// Replaces the constant `π` by a per-step table for the inner product and
    /// the Cameron–Martin map. Sampling still uses `Σ`.
    pub fn with_pi_table(mut self, table: Vec<Matrix>) -> Result<Self> {
        if table.len() != self.grid.n_steps() {
            return Err(Error::dims("π table length", self.grid.n_steps(), table.len()));
        }
        for p in &table {
            if p.rows() != self.d() || p.cols() != self.d() {
                return Err(Error::dims("π table entry", self.d(), p.rows()));
            }
            if !p.is_finite() {
                return Err(Error::NonFinite("π table"));
            }
        }
        self.pi_steps = Some(table);
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.sigma.rows()
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn pi(&self) -> &Matrix {
        &self.pi
    }

    #[inline]
    pub fn pi_at(&self, k: usize) -> &Matrix {
        match &self.pi_steps {
            Some(t) => &t[k],
            None => &self.pi,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `[M]` over `(t_a, t_b]`, i.e. `π · μ((t_a, t_b])` for constant `π`.
    pub fn covariation(&self, steps: Range<usize>) -> Matrix {
        let d = self.d();
        let mut out = Matrix::zeros(d, d);
        for k in steps {
            let p = self.pi_at(k);
            let m = self.grid.mass(k);
            for i in 0..d {
                for j in 0..d {
                    out.set(i, j, out.get(i, j) + p.get(i, j) * m);
                }
            }
        }
        out
    }
}

/// An `ℝ^d`-valued function sampled at the left endpoints of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    d: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 || !values.len().is_multiple_of(d) {
            return Err(Error::dims("grid function values", d, values.len()));
        }
        Ok(GridFunction { d, values })
    }

    pub fn zeros(d: usize, n_steps: usize) -> Self {
        GridFunction {
            d,
            values: vec![0.0; d * n_steps],
        }
    }

    /// Samples `f` at `t₀ … t_{n−1}`.
    pub fn sample<F>(grid: &TimeGrid, d: usize, mut f: F) -> Self
    where
        F: FnMut(f64, &mut [f64]),
    {
        let mut values = vec![0.0; d * grid.n_steps()];
        for (k, t) in grid.left_times().iter().enumerate() {
            f(*t, &mut values[k * d..(k + 1) * d]);
        }
        GridFunction { d, values }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() / self.d
    }

    #[inline]
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        if self.values.len() != other.values.len() || self.d != other.d {
            return Err(Error::dims("grid function", self.values.len(), other.values.len()));
        }
        Ok(GridFunction {
            d: self.d,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    fn check(&self, spec: &CovariationSpec, name: &'static str) -> Result<()> {
        if self.d != spec.d() {
            return Err(Error::dims(name, spec.d(), self.d));
        }
        if self.n_steps() != spec.grid().n_steps() {
            return Err(Error::dims(name, spec.grid().n_steps(), self.n_steps()));
        }
        if self.values.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite(name));
        }
        Ok(())
    }
}

/// `⟨f, g⟩_{Λ²} = Σ_k f_kᵀ π_k g_k Δμ_k`.
pub fn lambda2_inner(f: &GridFunction, g: &GridFunction, spec: &CovariationSpec) -> Result<f64> {
    f.check(spec, "lambda2_inner lhs")?;
    g.check(spec, "lambda2_inner rhs")?;
    let grid = spec.grid();
    let sum: CompensatedSum = (0..grid.n_steps())
        .map(|k| spec.pi_at(k).quad_form(f.at(k), g.at(k)) * grid.mass(k))
        .collect();
    Ok(sum.value())
}

/// The image `h = J(f)` of a grid-sampled drift generator.
#[derive(Debug, Clone)]
pub struct DriftEvaluation {
    values: GridFunction,
    increments: Vec<f64>,
    cumulative: Vec<f64>,
    norm_sq: f64,
    step_norms: Vec<f64>,
}

impl DriftEvaluation {
    /// The generator values `f_k`.
    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    pub fn d(&self) -> usize {
        self.values.d()
    }

    pub fn n_steps(&self) -> usize {
        self.values.n_steps()
    }

    /// `h_k − h_{k−1} = π f_k Δμ_k`, the finite-variation shift of step `k`.
    #[inline]
    pub fn increment(&self, k: usize) -> &[f64] {
        let d = self.d();
        &self.increments[k * d..(k + 1) * d]
    }

    /// `h(t_k)` for `k = 0 … n`; `h(t₀) = 0`.
    pub fn h(&self, k: usize) -> &[f64] {
        let d = self.d();
        &self.cumulative[k * d..(k + 1) * d]
    }

    /// `‖h‖²_H`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// The part of `‖h‖²_H` accumulated over the given steps.
    pub fn norm_sq_over(&self, steps: Range<usize>) -> f64 {
        self.step_norms[steps].iter().copied().collect::<CompensatedSum>().value()
    }

    pub fn is_zero(&self) -> bool {
        self.values.values().iter().all(|v| *v == 0.0)
    }
}

/// `J(f)(t_k) = Σ_{j<k} π_j f_j Δμ_j`, together with `‖J(f)‖²_H`.
pub fn cameron_martin_map(f: &GridFunction, spec: &CovariationSpec) -> Result<DriftEvaluation> {
    f.check(spec, "cameron_martin_map")?;
    let d = spec.d();
    let grid = spec.grid();
    let n = grid.n_steps();
    let mut increments = vec![0.0; n * d];
    let mut cumulative = vec![0.0; (n + 1) * d];
    let mut step_norms = Vec::with_capacity(n);
    let mut running = vec![CompensatedSum::default(); d];
    for k in 0..n {
        let inc = &mut increments[k * d..(k + 1) * d];
        spec.pi_at(k).mul_vec_into(f.at(k), inc);
        let m = grid.mass(k);
        inc.iter_mut().for_each(|v| *v *= m);
        step_norms.push(dot(f.at(k), inc));
        for i in 0..d {
            running[i].add(inc[i]);
            cumulative[(k + 1) * d + i] = running[i].value();
        }
    }
    let norm_sq = step_norms.iter().copied().collect::<CompensatedSum>().value();
    Ok(DriftEvaluation {
        values: f.clone(),
        increments,
        cumulative,
        norm_sq,
        step_norms,
    })
}

/// Driver increments `ΔM` for a batch of paths, laid out
/// `[path][step][coordinate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    n_paths: usize,
    n_steps: usize,
    d: usize,
    data: Vec<f64>,
}

impl Increments {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let len = self.n_steps * self.d;
        &self.data[p * len..(p + 1) * len]
    }

    pub fn step(&self, p: usize, k: usize) -> &[f64] {
        &self.path(p)[k * self.d..(k + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Fills one path of increments `ΔM_k = Σ z_k √Δμ_k`. `z` is scratch of length `d`.
pub(crate) fn fill_path_increments<R: Rng + ?Sized>(
    spec: &CovariationSpec,
    rng: &mut R,
    z: &mut [f64],
    out: &mut [f64],
) {
    let d = spec.d();
    let grid = spec.grid();
    for k in 0..grid.n_steps() {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let s = grid.sqrt_mass(k);
        let dm = &mut out[k * d..(k + 1) * d];
        spec.sigma().mul_vec_into(z, dm);
        dm.iter_mut().for_each(|v| *v *= s);
    }
}

/// Independent increments with `Cov(ΔM_k) = π Δμ_k`.
pub fn sample_increments<R: Rng + ?Sized>(
    spec: &CovariationSpec,
    rng: &mut R,
    n_paths: usize,
) -> Increments {
    let d = spec.d();
    let n_steps = spec.grid().n_steps();
    let len = n_steps * d;
    let mut data = vec![0.0; n_paths * len];
    let mut z = vec![0.0; d];
    for p in 0..n_paths {
        fill_path_increments(spec, rng, &mut z, &mut data[p * len..(p + 1) * len]);
    }
    Increments {
        n_paths,
        n_steps,
        d,
        data,
    }
}

/// `Σ_{k∈steps} f_kᵀ ΔM_k` with left-endpoint evaluation.
pub fn stochastic_integral(f: &GridFunction, dm: &[f64], steps: Range<usize>) -> f64 {
    let d = f.d();
    let mut acc = CompensatedSum::default();
    for k in steps {
        acc.add(dot(f.at(k), &dm[k * d..(k + 1) * d]));
    }
    acc.value()
}

/// `log (E(fᵀ•M)⁻¹)_u = −Σ_k f_kᵀ ΔM_k + ‖h‖²_H / 2` for one path's increments.
pub fn log_likelihood_inverse(drift: &DriftEvaluation, dm: &[f64]) -> Result<f64> {
    log_likelihood_inverse_over(drift, dm, 0..drift.n_steps())
}

/// The contribution of a contiguous block of steps to [`log_likelihood_inverse`].
pub fn log_likelihood_inverse_over(
    drift: &DriftEvaluation,
    dm: &[f64],
    steps: Range<usize>,
) -> Result<f64> {
    let expected = drift.n_steps() * drift.d();
    if dm.len() != expected {
        return Err(Error::dims("path increments", expected, dm.len()));
    }
    if steps.end > drift.n_steps() {
        return Err(Error::dims("step range", drift.n_steps(), steps.end));
    }
    let integral = stochastic_integral(drift.values(), dm, steps.clone());
    Ok(-integral + 0.5 * drift.norm_sq_over(steps))
}
