//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Expected values come from oracles computed here: a dense linear solve for
//! the Cameron–Martin norm, closed-form antiderivatives, the Black–Scholes
//! formula and the exact first moments of geometric Brownian motion and the
//! Ornstein–Uhlenbeck process.
//!
//! `ACCEPTANCE_ONLY=1,6` runs a subset.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use isdrift::config::RunConfig;
use isdrift::engine::{estimate_is, estimate_plain, ComparisonRow, EstimatorReport};
use isdrift::ffn::{antiderivative_net, Activation, ShallowNet};
use isdrift::gaussian::{
    cameron_martin_map, lambda2_inner, log_likelihood_inverse, sample_increments, CovariationSpec,
    GridFunction, TimeGrid,
};
use isdrift::linalg::Matrix;
use isdrift::models::{ModelKind, ModelSpec, PathView};
use isdrift::payoffs::{PathFunctional, PayoffKind, PayoffOutcome, PayoffSpec};
use isdrift::pipeline::{compare_all, price_importance, price_plain, train_resolved};
use isdrift::rng::{substream, Domain};
use isdrift::stats::RunningStats;
use isdrift::training::objective_batch;
use isdrift::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn fail(e: isdrift::Error) -> Outcome {
    Outcome::new(false, format!("error: {e}"))
}

// Oracles

/// `xᵀ A⁻¹ x` by Gaussian elimination with partial pivoting.
fn solve_quad(a: &[Vec<f64>], x: &[f64]) -> f64 {
    let n = x.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut b = x.to_vec();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap();
        m.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut y = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * y[k]).sum();
        y[r] = (b[r] - s) / m[r][r];
    }
    x.iter().zip(&y).map(|(a, b)| a * b).sum()
}

fn black_scholes_call(s: f64, k: f64, r: f64, vol: f64, t: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let d1 = ((s / k).ln() + (r + 0.5 * vol * vol) * t) / (vol * t.sqrt());
    let d2 = d1 - vol * t.sqrt();
    s * n.cdf(d1) - k * (-r * t).exp() * n.cdf(d2)
}

/// Functionals of the terminal state used by the pricing and moment checks.
enum Terminal {
    Call { strike: f64 },
    Coordinate(usize),
}

impl PathFunctional for Terminal {
    fn outcome(&self, path: &PathView<'_>, _grid: &TimeGrid) -> Result<PayoffOutcome> {
        let x = path.state(path.n_nodes() - 1);
        let (value, in_money) = match *self {
            Terminal::Call { strike } => ((x[0] - strike).max(0.0), x[0] > strike),
            Terminal::Coordinate(i) => (x[i], true),
        };
        Ok(PayoffOutcome {
            value,
            in_money,
            knocked_out: None,
        })
    }
}

fn bs_model(mu: f64, sigma: Matrix, s0: Vec<f64>, rate: f64) -> ModelSpec {
    ModelSpec {
        kind: ModelKind::BlackScholes,
        mu: vec![mu; s0.len()],
        mean_level: vec![],
        speed: vec![],
        sigma,
        s0,
        v0: vec![],
        rate,
    }
}

fn combined_se(a: &EstimatorReport, b: &EstimatorReport) -> f64 {
    (a.std_error().powi(2) + b.std_error().powi(2)).sqrt()
}

// Criteria

fn isometry() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(1..=4);
        let n = rng.random_range(1..=40);
        let mut times = vec![0.0];
        for _ in 0..n {
            let t = times.last().unwrap() + rng.random_range(0.01..0.5);
            times.push(t);
        }
        let masses: Vec<f64> = (0..n)
            .map(|k| {
                if k > 0 && rng.random_bool(0.1) {
                    0.0
                } else {
                    rng.random_range(0.01..0.3)
                }
            })
            .collect();
        let grid = TimeGrid::new(times, masses.clone()).unwrap();
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let off = rng.random_range(-0.3..0.3);
                        if i == j {
                            rng.random_range(1.0..2.0) + off
                        } else {
                            off
                        }
                    })
                    .collect()
            })
            .collect();
        let pi: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).map(|k| rows[i][k] * rows[j][k]).sum())
                    .collect()
            })
            .collect();
        let cov = CovariationSpec::new(Matrix::from_rows(&rows).unwrap(), grid).unwrap();
        let f = GridFunction::new(d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .unwrap();
        let h = cameron_martin_map(&f, &cov).unwrap();
        // ‖h‖²_H from the increments alone: Σ Δhᵀ π⁻¹ Δh / Δμ.
        let oracle: f64 = (0..n)
            .filter(|&k| masses[k] > 0.0)
            .map(|k| solve_quad(&pi, h.increment(k)) / masses[k])
            .sum();
        let inner = lambda2_inner(&f, &f, &cov).unwrap();
        worst = worst
            .max((oracle - inner).abs() / oracle)
            .max((h.norm_sq() - oracle).abs() / oracle);
    }

    let degenerate = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
    let cov = CovariationSpec::new(degenerate, TimeGrid::uniform(1.0, 10).unwrap()).unwrap();
    let f = GridFunction::new(2, vec![1.0; 20]).unwrap();
    let seminorm = lambda2_inner(&f, &f, &cov).unwrap();
    let h = cameron_martin_map(&f, &cov).unwrap();
    let zero = seminorm == 0.0 && h.norm_sq() == 0.0 && (0..10).all(|k| h.increment(k) == [0.0, 0.0]);
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-12 && zero && secs < 10.0,
        format!("max rel err {worst:.2e} over 1000 cases, degenerate seminorm {seminorm}, {secs:.2}s"),
    )
}

fn antiderivative_convergence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let max_err = |net: &ShallowNet, n: usize| {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        let cov = CovariationSpec::new(Matrix::identity(1), grid.clone()).unwrap();
        let f = GridFunction::sample(&grid, 1, |t, out| net.forward_into(t, out));
        let h = cameron_martin_map(&f, &cov).unwrap();
        let exact = antiderivative_net(net).unwrap();
        grid.times()
            .iter()
            .enumerate()
            .map(|(k, &t)| (h.h(k)[0] - exact.eval(t)).abs())
            .fold(0.0, f64::max)
    };
    // Nets at Glorot scale for both layers, hidden width 1 to 6.
    let mut min_order = f64::INFINITY;
    let mut strict = 0;
    let mut worst_final = 0.0f64;
    let mut predicted = 0.0f64;
    for _ in 0..100 {
        let hidden = rng.random_range(1..=6);
        let limit = (6.0 / (1.0 + hidden as f64)).sqrt();
        let params = (0..ShallowNet::param_count(hidden, 1))
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        let net = ShallowNet::from_params(hidden, 1, Activation::Tanh, params).unwrap();
        let coarse = max_err(&net, 2016);
        let fine = max_err(&net, 4032);
        let order = (coarse / fine).log2();
        min_order = min_order.min(order);
        strict += (order >= 1.0) as usize;
        worst_final = worst_final.max(fine);
        // Leading error term of the left-endpoint rule at t = u.
        let rise = net.forward(1.0).unwrap()[0] - net.forward(0.0).unwrap()[0];
        predicted = predicted.max(rise.abs() / (2.0 * 4032.0));
    }
    let secs = start.elapsed().as_secs_f64();
    // The left-endpoint rule is exactly first order; the O(Δt²) term can pull
    // the two-grid estimate a little either side of 1.
    Outcome::new(
        min_order >= 0.99 && worst_final <= 1e-4 && secs < 30.0,
        format!(
            "min observed order {min_order:.4} ({strict}/100 at or above 1), \
             max error at dt=1/4032 {worst_final:.2e} (leading term dt/2·|f(u)-f(0)| up to {predicted:.2e}), \
             {secs:.2}s"
        ),
    )
}

fn doleans_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut details = Vec::new();
    let mut pass = true;
    for case in 0..5 {
        let d = 3;
        let n = 50;
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 0.4 } else { rng.random_range(-0.1..0.1) }).collect())
            .collect();
        let cov = CovariationSpec::new(Matrix::from_rows(&rows).unwrap(), TimeGrid::uniform(1.0, n).unwrap())
            .unwrap();
        let raw = GridFunction::new(d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let target = rng.random_range(0.5..4.0);
        let scale = (target / lambda2_inner(&raw, &raw, &cov).unwrap()).sqrt();
        let f = raw.combine(scale, &raw, 0.0).unwrap();
        let h = cameron_martin_map(&f, &cov).unwrap();
        let mut stats = RunningStats::default();
        let mut paths = substream(30 + case, Domain::Paths, 0);
        for _ in 0..10 {
            let inc = sample_increments(&cov, &mut paths, 10_000);
            for p in 0..inc.n_paths() {
                stats.push((-log_likelihood_inverse(&h, inc.path(p)).unwrap()).exp());
            }
        }
        let z = (stats.mean() - 1.0) / stats.std_error();
        pass &= z.abs() <= 3.0 && h.norm_sq() <= 4.0;
        details.push(format!("|h|²={:.2} z={z:+.2}", h.norm_sq()));
    }
    Outcome::new(pass, details.join(", "))
}

fn gradient_check() -> Outcome {
    let model = bs_model(
        0.05,
        Matrix::from_rows(&[vec![0.25, 0.05], vec![0.05, 0.2]]).unwrap(),
        vec![1.0, 1.0],
        0.05,
    );
    let cov = model.covariation(TimeGrid::uniform(1.0, 20).unwrap()).unwrap();
    let payoff = PayoffSpec::asian_call(vec![0.5, 0.5], 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let hidden = 2;
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for point in 0..20 {
        let params: Vec<f64> = (0..ShallowNet::param_count(hidden, 2))
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        let eval = |p: &[f64]| {
            let net = ShallowNet::from_params(hidden, 2, Activation::ScaledTanh, p.to_vec()).unwrap();
            let mut crn = substream(4, Domain::Training, point);
            objective_batch(&net, &model, &payoff, &cov, &mut crn, 64).unwrap()
        };
        let g = eval(&params).grad.0;
        let mut diff_sq = 0.0;
        let mut norm_sq = 0.0;
        for j in 0..params.len() {
            let mut up = params.clone();
            let mut down = params.clone();
            up[j] += eps;
            down[j] -= eps;
            let fd = (eval(&up).value - eval(&down).value) / (2.0 * eps);
            diff_sq += (g[j] - fd).powi(2);
            norm_sq += g[j].powi(2);
        }
        worst = worst.max((diff_sq / norm_sq).sqrt());
    }
    Outcome::new(worst <= 1e-5, format!("max relative error {worst:.2e} over 20 points"))
}

fn unbiasedness() -> Outcome {
    let model = bs_model(
        0.05,
        Matrix::from_rows(&[vec![0.3, 0.1], vec![0.05, 0.25]]).unwrap(),
        vec![1.0, 1.0],
        0.05,
    );
    let cov = model.covariation(TimeGrid::uniform(1.0, 50).unwrap()).unwrap();
    let payoff = PayoffSpec::asian_call(vec![0.5, 0.5], 1.1).unwrap();
    // Fixed drift: constant output biases plus a mild time dependence.
    let params = vec![1.0, -0.5, 0.3, 0.2, 0.4, 0.0, 0.0, -0.3, 2.0, 1.5];
    let net = ShallowNet::from_params(2, 2, Activation::ScaledTanh, params).unwrap();
    let mut hits = 0;
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let plain = estimate_plain(&model, &payoff, &cov, 1000 + seed, 100_000);
        let is = estimate_is(&model, &payoff, &cov, &net, 2000 + seed, 100_000);
        let (plain, is) = match (plain, is) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return fail(e),
        };
        let z = (is.mean() - plain.mean()).abs() / combined_se(&plain, &is);
        worst = worst.max(z);
        hits += (z <= 3.0) as usize;
    }
    Outcome::new(
        hits >= 19,
        format!("{hits}/20 seeds within 3 combined SE, max |z| {worst:.2}"),
    )
}

fn european_call() -> Outcome {
    let (s0, k, r, vol) = (100.0, 100.0, 0.05, 0.2);
    let dt = 1.0 / 252.0;
    let model = bs_model(r, Matrix::diag(&[vol]), vec![s0], r);
    let cov = model.covariation(TimeGrid::with_step(1.0, dt).unwrap()).unwrap();
    let report = match estimate_plain(&model, &Terminal::Call { strike: k }, &cov, 6, 100_000) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let exact = black_scholes_call(s0, k, r, vol, 1.0);
    let tol = 3.0 * report.std_error() + 2.0 * dt * exact;
    let err = (report.mean() - exact).abs();
    Outcome::new(
        err <= tol,
        format!("MC {:.4} vs formula {exact:.4}, |diff| {err:.4} <= {tol:.4}", report.mean()),
    )
}

/// Plain pricing, training and IS pricing at N = 5e3 and 1e5 for a sampled config.
fn table_protocol(config: RunConfig) -> Result<(Vec<ComparisonRow>, Vec<EstimatorReport>, Vec<EstimatorReport>, Option<String>)> {
    let mut config = config;
    config.estimation.sizes = vec![5_000, 100_000];
    let resolved = config.resolve()?;
    let plain = price_plain(&resolved)?;
    let outcome = train_resolved(&resolved)?;
    let is = price_importance(&resolved, &outcome.net)?;
    Ok((compare_all(&plain, &is)?, plain, is, outcome.halted))
}

fn calibrated(row: &ComparisonRow) -> bool {
    row.mc_kappa <= 0.02 && (15.0..=30.0).contains(&row.mc_se_pct)
}

fn row_summary(rows: &[ComparisonRow]) -> String {
    let (a, b) = (&rows[0], &rows[1]);
    format!(
        "plain κ {:.2}% SE {:.1}% at 5e3; at 1e5 VR {:.1}, IS κ {:.1}%",
        100.0 * a.mc_kappa,
        a.mc_se_pct,
        b.vr,
        100.0 * b.is_kappa
    )
}

fn black_scholes_table() -> Outcome {
    let start = Instant::now();
    let (rows, ..) = match table_protocol(RunConfig::for_model(ModelKind::BlackScholes, 2)) {
        Ok(x) => x,
        Err(e) => return fail(e),
    };
    let secs = start.elapsed().as_secs_f64();
    let pass = calibrated(&rows[0]) && rows[1].vr >= 10.0 && rows[1].is_kappa >= 0.20 && secs < 1200.0;
    Outcome::new(pass, format!("{}, {secs:.0}s", row_summary(&rows)))
}

fn stochastic_volatility_tables() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for kind in [ModelKind::Heston, ModelKind::ThreeHalves] {
        let start = Instant::now();
        let (rows, ..) = match table_protocol(RunConfig::for_model(kind, 2)) {
            Ok(x) => x,
            Err(e) => return fail(e),
        };
        let secs = start.elapsed().as_secs_f64();
        pass &= calibrated(&rows[0]) && rows[1].vr >= 5.0 && secs < 1800.0;
        details.push(format!("{kind}: {}, {secs:.0}s", row_summary(&rows)));
    }
    Outcome::new(pass, details.join("; "))
}

fn knockout_table() -> Outcome {
    let mut config = RunConfig::for_model(ModelKind::BlackScholes, 2);
    config.payoff.kind = PayoffKind::AsianBasketKnockout;
    config.payoff.barrier_factors = Some([0.9, 1.6]);
    let (rows, plain, is, halted) = match table_protocol(config) {
        Ok(x) => x,
        Err(e) => return fail(e),
    };
    let row = &rows[1];
    let z = (is[1].mean() - plain[1].mean()).abs() / combined_se(&plain[1], &is[1]);
    let pass = halted.is_none() && row.vr >= 5.0 && z <= 3.0;
    Outcome::new(
        pass,
        format!(
            "VR {:.1}, |z| {z:.2}, θ {:.1}% -> {:.1}%, κ {:.2}% -> {:.1}%{}",
            row.vr,
            100.0 * row.mc_theta.unwrap_or(f64::NAN),
            100.0 * row.is_theta.unwrap_or(f64::NAN),
            100.0 * row.mc_kappa,
            100.0 * row.is_kappa,
            halted.map(|h| format!(", halted: {h}")).unwrap_or_default()
        ),
    )
}

fn terminal_means() -> Outcome {
    let grid = TimeGrid::with_step(1.0, 1.0 / 252.0).unwrap();
    let (s0, mu) = (1.0, 0.08);
    let bs = bs_model(mu, Matrix::diag(&[0.3]), vec![s0], 0.0);
    let bs_cov = bs.covariation(grid.clone()).unwrap();
    let (theta, m, v0) = (1.0, 0.3, 0.6);
    let ss = ModelSpec {
        kind: ModelKind::SteinStein,
        mu: vec![0.05],
        mean_level: vec![m],
        speed: vec![theta],
        sigma: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.1, 0.4]]).unwrap(),
        s0: vec![1.0],
        v0: vec![v0],
        rate: 0.0,
    };
    let ss_cov = ss.covariation(grid).unwrap();
    let checks = [
        (&bs, &bs_cov, Terminal::Coordinate(0), s0 * mu.exp(), "BS S_u"),
        (
            &ss,
            &ss_cov,
            Terminal::Coordinate(1),
            (-theta).exp() * v0 + (1.0 - (-theta).exp()) * m,
            "Stein & Stein V_u",
        ),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (i, (model, cov, functional, exact, name)) in checks.iter().enumerate() {
        let r = match estimate_plain(model, functional, cov, 10 + i as u64, 100_000) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        let z = (r.mean() - exact) / r.std_error();
        pass &= z.abs() <= 3.0;
        details.push(format!("{name} {:.5} vs {exact:.5} (z={z:+.2})", r.mean()));
    }
    Outcome::new(pass, details.join(", "))
}

fn run_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_isdrift");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "schema = \"isdrift.run/v1\"\n\
         [model]\nkind = \"heston\"\nn_assets = 2\n[model.recipe]\nseed = 3\n\
         [payoff]\nmoneyness = 1.1\n\
         [grid]\ndt = 0.02\n\
         [training]\ndt = 0.02\nepochs = 2\nsteps_per_epoch = 25\nbatch_size = 64\nsmoothing_window = 10\n\
         [estimation]\nsizes = [3000, 9000]\n",
    )
    .unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .args(["run", "--dump-paths", "4", "--threads", threads, "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(&out)
            .output()
            .unwrap();
        (status.status.success(), out)
    };
    let (ok_a, a) = run("a", "1");
    let (ok_b, b) = run("b", "1");
    let (ok_c, c) = run("c", "8");
    if !(ok_a && ok_b && ok_c) {
        return Outcome::new(false, "a run exited with failure");
    }
    let files = |p: &Path| {
        let mut names: Vec<_> = fs::read_dir(p).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        names
    };
    let names = files(&a);
    let mut same = names == files(&b) && names == files(&c);
    for name in &names {
        let x = fs::read(a.join(name)).unwrap();
        same &= x == fs::read(b.join(name)).unwrap() && x == fs::read(c.join(name)).unwrap();
    }
    Outcome::new(
        same && names.len() >= 10,
        format!("{} artifacts compared across two 1-thread runs and one 8-thread run", names.len()),
    )
}

fn main() -> ExitCode {
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "isometry", isometry),
        (2, "antiderivative convergence", antiderivative_convergence),
        (3, "Doléans normalization", doleans_normalization),
        (4, "gradient vs finite differences", gradient_check),
        (5, "IS unbiasedness", unbiasedness),
        (6, "European call vs Black–Scholes", european_call),
        (7, "Black–Scholes variance reduction", black_scholes_table),
        (8, "Heston and 3/2 variance reduction", stochastic_volatility_tables),
        (9, "knock-out variance reduction", knockout_table),
        (10, "terminal means", terminal_means),
        (11, "run determinism", run_determinism),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let o = check();
        failed += !o.pass as usize;
        println!(
            "criterion {id:>2} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
