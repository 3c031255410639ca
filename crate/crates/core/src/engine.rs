//! Plain and importance-sampled Monte Carlo estimators.
//!
//! Paths are processed in fixed blocks. Block `b` draws from substream `b` of
//! the run seed and the per-block statistics are merged in block order, so a
//! report is a function of `(inputs, seed)` only, whatever the thread count.

use std::fmt;
use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ffn::ShallowNet;
use crate::gaussian::CovariationSpec;
use crate::models::{Measure, ModelSpec, Noise, PathView, Simulator};
use crate::payoffs::PathFunctional;
use crate::rng::{substream, Domain};
use crate::stats::RunningStats;
use crate::training::{variance_ratio, LOG_WEIGHT_LIMIT};

pub const BLOCK_SIZE: usize = 1024;

/// One estimator run; the columns of a results table for one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub n: u64,
    /// Discounted price in cents.
    pub mean_cents: f64,
    /// Standard error as a percentage of the mean.
    pub se_pct: f64,
    /// Fraction of paths whose time average exceeds the strike.
    pub kappa: f64,
    /// Fraction of paths knocked out; barrier payoffs only.
    pub theta: Option<f64>,
    /// Per-sample variance of the discounted (weighted) payoff.
    pub variance: f64,
    pub seed: u64,
    pub measure: Measure,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl EstimatorReport {
    /// Discounted price in currency units.
    pub fn mean(&self) -> f64 {
        self.mean_cents / 100.0
    }

    /// Standard error of the mean in currency units.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.variance / self.n as f64).sqrt()
    }
}

impl fmt::Display for EstimatorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} N={} mean={}c SE={:.1}% κ={:.2}%",
            self.measure,
            self.n,
            significant(self.mean_cents, 4),
            self.se_pct,
            100.0 * self.kappa
        )?;
        if let Some(t) = self.theta {
            write!(f, " θ={:.2}%", 100.0 * t)?;
        }
        Ok(())
    }
}

/// Formats `x` with `digits` significant digits.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

#[derive(Debug, Clone, Copy, Default)]
struct BlockTally {
    stats: RunningStats,
    in_money: u64,
    knocked_out: u64,
}

impl BlockTally {
    fn merge(&mut self, other: &BlockTally) {
        self.stats.merge(&other.stats);
        self.in_money += other.in_money;
        self.knocked_out += other.knocked_out;
    }
}

/// Prices one payoff under one model on one grid.
pub struct Estimator<'a> {
    model: &'a ModelSpec,
    payoff: &'a dyn PathFunctional,
    cov: &'a CovariationSpec,
    noise: Noise,
}

impl<'a> Estimator<'a> {
    pub fn new(
        model: &'a ModelSpec,
        payoff: &'a dyn PathFunctional,
        cov: &'a CovariationSpec,
    ) -> Result<Self> {
        model.ensure_valid()?;
        if cov.d() != model.driver_dim() {
            return Err(Error::dims("covariation dimension", model.driver_dim(), cov.d()));
        }
        Ok(Estimator {
            model,
            payoff,
            cov,
            noise: Noise::Gaussian,
        })
    }

    pub fn with_noise(mut self, noise: Noise) -> Self {
        self.noise = noise;
        self
    }

    /// Plain Monte Carlo under `P`.
    pub fn plain(&self, seed: u64, n: usize) -> Result<EstimatorReport> {
        let sim = Simulator::new(self.model, self.cov)?.with_noise(self.noise);
        self.run(&sim, seed, n)
    }

    /// Paths under `P_h` for the drift generated by `net`, each payoff
    /// multiplied by its inverse likelihood.
    pub fn importance(&self, net: &ShallowNet, seed: u64, n: usize) -> Result<EstimatorReport> {
        let sim = Simulator::new(self.model, self.cov)?
            .with_noise(self.noise)
            .with_drift(net)?;
        self.run(&sim, seed, n)
    }

    fn run(&self, sim: &Simulator<'_>, seed: u64, n: usize) -> Result<EstimatorReport> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "sample size must be positive".into(),
            });
        }
        let start = Instant::now();
        let n_blocks = n.div_ceil(BLOCK_SIZE);
        let tallies = (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let count = BLOCK_SIZE.min(n - b * BLOCK_SIZE);
                self.run_block(sim, seed, b, count)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = BlockTally::default();
        for t in &tallies {
            total.merge(t);
        }
        let discount = (-self.model.rate * self.cov.grid().horizon()).exp();
        let mean = discount * total.stats.mean();
        let variance = discount * discount * total.stats.variance();
        let se = (variance / n as f64).sqrt();
        let se_pct = if mean != 0.0 { 100.0 * se / mean.abs() } else { 0.0 };
        Ok(EstimatorReport {
            n: n as u64,
            mean_cents: 100.0 * mean,
            se_pct,
            kappa: total.in_money as f64 / n as f64,
            theta: self
                .payoff
                .has_barrier()
                .then(|| total.knocked_out as f64 / n as f64),
            variance,
            seed,
            measure: sim.measure(),
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn run_block(
        &self,
        sim: &Simulator<'_>,
        seed: u64,
        block: usize,
        count: usize,
    ) -> Result<BlockTally> {
        let mut rng = substream(seed, Domain::Paths, block as u64);
        let mut scratch = sim.scratch();
        let mut tally = BlockTally::default();
        let grid = self.cov.grid();
        let m = self.model.state_dim();
        let n_assets = self.model.n_assets();
        for i in 0..count {
            let path = block * BLOCK_SIZE + i;
            let log_w = sim.simulate_path(&mut rng, &mut scratch, path)?;
            if log_w > LOG_WEIGHT_LIMIT {
                return Err(Error::WeightOverflow {
                    path,
                    log_weight: log_w,
                    limit: LOG_WEIGHT_LIMIT,
                });
            }
            let out = self
                .payoff
                .outcome(&PathView::new(scratch.states(), m, n_assets), grid)?;
            let y = if out.value == 0.0 { 0.0 } else { out.value * log_w.exp() };
            tally.stats.push(y);
            tally.in_money += out.in_money as u64;
            tally.knocked_out += out.knocked_out.unwrap_or(false) as u64;
        }
        Ok(tally)
    }
}

pub fn estimate_plain(
    model: &ModelSpec,
    payoff: &dyn PathFunctional,
    cov: &CovariationSpec,
    seed: u64,
    n: usize,
) -> Result<EstimatorReport> {
    Estimator::new(model, payoff, cov)?.plain(seed, n)
}

pub fn estimate_is(
    model: &ModelSpec,
    payoff: &dyn PathFunctional,
    cov: &CovariationSpec,
    net: &ShallowNet,
    seed: u64,
    n: usize,
) -> Result<EstimatorReport> {
    Estimator::new(model, payoff, cov)?.importance(net, seed, n)
}

/// One results-table row: plain columns, importance-sampled columns, VR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: u64,
    pub mc_mean_cents: f64,
    pub mc_se_pct: f64,
    pub mc_kappa: f64,
    pub mc_theta: Option<f64>,
    pub is_mean_cents: f64,
    pub is_se_pct: f64,
    pub is_kappa: f64,
    pub is_theta: Option<f64>,
    pub vr: f64,
}

pub fn compare(plain: &EstimatorReport, weighted: &EstimatorReport) -> Result<ComparisonRow> {
    if plain.n != weighted.n {
        return Err(Error::Mismatch(format!(
            "sample sizes differ ({} vs {})",
            plain.n, weighted.n
        )));
    }
    if plain.theta.is_some() != weighted.theta.is_some() {
        return Err(Error::Mismatch("only one report has a barrier".into()));
    }
    Ok(ComparisonRow {
        n: plain.n,
        mc_mean_cents: plain.mean_cents,
        mc_se_pct: plain.se_pct,
        mc_kappa: plain.kappa,
        mc_theta: plain.theta,
        is_mean_cents: weighted.mean_cents,
        is_se_pct: weighted.se_pct,
        is_kappa: weighted.kappa,
        is_theta: weighted.theta,
        vr: variance_ratio(plain, weighted)?,
    })
}

impl fmt::Display for ComparisonRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |x: f64| format!("{:.2}%", 100.0 * x);
        let theta = |t: Option<f64>| t.map(|t| format!(" {:>7}", pct(t))).unwrap_or_default();
        write!(
            f,
            "{:>7} | {:>8} {:>6} {:>7}{} | {:>8} {:>6} {:>7}{} | {:>6}",
            self.n,
            significant(self.mc_mean_cents, 4),
            format!("{:.1}%", self.mc_se_pct),
            pct(self.mc_kappa),
            theta(self.mc_theta),
            significant(self.is_mean_cents, 4),
            format!("{:.1}%", self.is_se_pct),
            pct(self.is_kappa),
            theta(self.is_theta),
            format!("{:.0}", self.vr),
        )
    }
}

/// Output encodings for reports and comparison rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

pub fn write_records<T: Serialize, W: Write>(records: &[T], format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, records)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_records<T: for<'de> Deserialize<'de>, R: Read>(format: Format, input: R) -> Result<Vec<T>> {
    match format {
        Format::Csv => csv::Reader::from_reader(input)
            .deserialize()
            .map(|r| r.map_err(Error::from))
            .collect(),
        Format::Json => Ok(serde_json::from_reader(input)?),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::gaussian::TimeGrid;
    use crate::linalg::Matrix;
    use crate::models::ModelKind;
    use crate::payoffs::{Barrier, PayoffSpec};
    use proptest::prelude::*;

    pub(crate) fn report_with_variance(variance: f64) -> EstimatorReport {
        EstimatorReport {
            n: 1000,
            mean_cents: 250.0,
            se_pct: 1.0,
            kappa: 0.5,
            theta: None,
            variance,
            seed: 1,
            measure: Measure::P,
            wall_seconds: 0.0,
        }
    }

    fn bs(n: usize) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::BlackScholes,
            mu: vec![0.05; n],
            mean_level: vec![],
            speed: vec![],
            sigma: Matrix::diag(&vec![0.2; n]),
            s0: vec![1.0; n],
            v0: vec![],
            rate: 0.05,
        }
    }

    #[test]
    fn frozen_constant_payoff_has_zero_error() {
        // μ = 0 keeps the frozen path at s₀ = 2, so the payoff is 2 − 1 = 1.
        let mut model = bs(1);
        model.mu = vec![0.0];
        model.s0 = vec![2.0];
        let cov = model.covariation(TimeGrid::uniform(1.0, 12).unwrap()).unwrap();
        let payoff = PayoffSpec::asian_call(vec![1.0], 1.0).unwrap();
        let r = Estimator::new(&model, &payoff, &cov)
            .unwrap()
            .with_noise(Noise::Frozen)
            .plain(1, 3000)
            .unwrap();
        let want = 100.0 * (-0.05f64).exp();
        assert!((r.mean_cents - want).abs() < 1e-10);
        assert_eq!(r.variance, 0.0);
        assert_eq!(r.se_pct, 0.0);
        assert_eq!(r.kappa, 1.0);
    }

    #[test]
    fn null_network_matches_plain() {
        let model = bs(2);
        let cov = model.covariation(TimeGrid::uniform(1.0, 20).unwrap()).unwrap();
        let payoff = PayoffSpec::asian_call(vec![0.5, 0.5], 1.0).unwrap();
        let est = Estimator::new(&model, &payoff, &cov).unwrap();
        let plain = est.plain(11, 3000).unwrap();
        let net = ShallowNet::zeros(2, 2, crate::ffn::Activation::ScaledTanh);
        let is = est.importance(&net, 11, 3000).unwrap();
        assert_eq!(is.measure, Measure::Ph);
        assert_eq!(plain.mean_cents, is.mean_cents);
        assert_eq!(plain.variance, is.variance);
        assert_eq!(plain.kappa, is.kappa);
        let row = compare(&plain, &is).unwrap();
        assert_eq!(row.vr, 1.0);
    }

    #[test]
    fn zero_sample_size_rejected() {
        let model = bs(1);
        let cov = model.covariation(TimeGrid::uniform(1.0, 4).unwrap()).unwrap();
        let payoff = PayoffSpec::asian_call(vec![1.0], 1.0).unwrap();
        assert!(estimate_plain(&model, &payoff, &cov, 0, 0).is_err());
    }

    #[test]
    fn barrier_reports_theta() {
        let model = bs(1);
        let cov = model.covariation(TimeGrid::uniform(1.0, 20).unwrap()).unwrap();
        let payoff =
            PayoffSpec::asian_knockout(vec![1.0], 1.0, Barrier { lower: 0.9, upper: 1.2 }).unwrap();
        let r = estimate_plain(&model, &payoff, &cov, 2, 2000).unwrap();
        let theta = r.theta.unwrap();
        assert!(theta > 0.0 && theta < 1.0);
    }

    #[test]
    fn compare_rejects_mismatch() {
        let a = report_with_variance(1.0);
        let mut b = a.clone();
        b.n = 5;
        assert!(compare(&a, &b).is_err());
        let mut c = a.clone();
        c.theta = Some(0.1);
        assert!(compare(&a, &c).is_err());
    }

    #[test]
    fn significant_digits() {
        assert_eq!(significant(2.61934, 4), "2.619");
        assert_eq!(significant(0.034812, 3), "0.0348");
        assert_eq!(significant(113.2, 3), "113");
    }

    fn arb_row() -> impl Strategy<Value = ComparisonRow> {
        (
            1u64..1_000_000,
            prop::array::uniform8(-1e3f64..1e3),
            prop::option::of(0.0f64..1.0),
            prop::option::of(0.0f64..1.0),
        )
            .prop_map(|(n, v, t1, t2)| ComparisonRow {
                n,
                mc_mean_cents: v[0],
                mc_se_pct: v[1],
                mc_kappa: v[2],
                mc_theta: t1,
                is_mean_cents: v[3],
                is_se_pct: v[4],
                is_kappa: v[5],
                is_theta: t2,
                vr: v[6] * v[7],
            })
    }

    proptest! {
        #[test]
        fn rows_round_trip(rows in prop::collection::vec(arb_row(), 1..4)) {
            for format in [Format::Csv, Format::Json] {
                let mut buf = Vec::new();
                write_records(&rows, format, &mut buf).unwrap();
                let back: Vec<ComparisonRow> = read_records(format, buf.as_slice()).unwrap();
                prop_assert_eq!(&back, &rows);
            }
        }
    }
}
