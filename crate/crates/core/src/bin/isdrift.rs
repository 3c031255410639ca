use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use isdrift::config::RunConfig;
use isdrift::engine::{read_records, ComparisonRow, EstimatorReport, Format};
use isdrift::ffn::ShallowNet;
use isdrift::pipeline::{self, RunOptions};
use isdrift::{Error, Result};

#[derive(Parser)]
#[command(name = "isdrift", version, about = "Neural importance sampling for Asian basket options")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Training and estimation seed; the recipe seed for `sample-params`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Report format; both when omitted.
    #[arg(long, global = true, value_enum)]
    format: Option<Fmt>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Resolve and write the config only.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Write this many plain paths to `paths.csv`.
    #[arg(long, global = true)]
    dump_paths: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    Csv,
    Json,
}

impl From<Fmt> for Format {
    fn from(f: Fmt) -> Self {
        match f {
            Fmt::Csv => Format::Csv,
            Fmt::Json => Format::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the config and the model's structural constraints.
    Validate,
    /// Draw model parameters from the recipe and print the resolved config.
    SampleParams,
    /// Plain Monte Carlo at every configured sample size.
    Price,
    /// Train the drift network.
    Train,
    /// Importance-sampled pricing with a trained network.
    PriceIs {
        /// Defaults to `<out-dir>/checkpoint.txt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Comparison rows from plain and importance-sampled reports.
    Compare {
        /// Defaults to `<out-dir>/plain.json`.
        #[arg(long)]
        plain: Option<PathBuf>,
        /// Defaults to `<out-dir>/importance.json`.
        #[arg(long)]
        importance: Option<PathBuf>,
    },
    /// Plain pricing, training, importance sampling and comparison.
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(c: &Common) -> Result<RunConfig> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let config = RunConfig::load(path)?;
    Ok(match c.seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn formats(c: &Common, config: &RunConfig) -> Vec<Format> {
    match c.format {
        Some(f) => vec![f.into()],
        None => config.output.formats.clone(),
    }
}

fn read_reports<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        _ => return Err(Error::Config(format!("{}: expected .csv or .json", path.display()))),
    };
    read_records(format, fs::File::open(path)?)
}

fn print_reports(reports: &[EstimatorReport]) {
    for r in reports {
        println!("{r}");
    }
}

fn print_rows(rows: &[ComparisonRow]) {
    println!("      N | MC mean      SE       κ | IS mean      SE       κ |     VR");
    for r in rows {
        println!("{r}");
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    let out = &c.out_dir;
    match &cli.command {
        Command::Validate => {
            let r = load(c)?.resolve()?;
            println!(
                "ok: {} with {} assets, driver dimension {}, {} steps",
                r.model.kind,
                r.model.n_assets(),
                r.model.driver_dim(),
                r.grid.n_steps()
            );
        }
        Command::SampleParams => {
            let mut config = load(c)?;
            if let (Some(s), Some(recipe)) = (c.seed, config.model.recipe.as_mut()) {
                recipe.seed = s;
                config.model.params = None;
            }
            if config.model.recipe.is_none() {
                return Err(Error::Config("model has no recipe".into()));
            }
            print!("{}", config.resolve()?.config.to_toml()?);
        }
        Command::Price => {
            let config = load(c)?;
            fs::create_dir_all(out)?;
            let r = config.resolve().map_err(|e| pipeline::record_error(out, "resolve", e))?;
            fs::write(out.join("resolved.toml"), r.config.to_toml()?)?;
            if c.dry_run {
                return Ok(());
            }
            if let Some(n) = c.dump_paths.filter(|&n| n > 0) {
                pipeline::dump_paths(&r, n, &out.join("paths.csv"))?;
            }
            let reports = pipeline::price_plain(&r).map_err(|e| pipeline::record_error(out, "plain", e))?;
            pipeline::emit(out, "plain", &reports, &formats(c, &config))?;
            print_reports(&reports);
        }
        Command::Train => {
            let config = load(c)?;
            fs::create_dir_all(out)?;
            let r = config.resolve().map_err(|e| pipeline::record_error(out, "resolve", e))?;
            fs::write(out.join("resolved.toml"), r.config.to_toml()?)?;
            if c.dry_run {
                return Ok(());
            }
            let outcome = pipeline::train_resolved(&r).map_err(|e| pipeline::record_error(out, "train", e))?;
            outcome.net.save(out.join("checkpoint.txt"))?;
            outcome
                .trace
                .write_csv(fs::File::create(out.join("trace.csv"))?)?;
            if let (Some(step), Some(v)) = (outcome.trace.best_step, outcome.trace.best_smoothed) {
                println!("best step {step}, smoothed second moment {v:e}");
            }
            if let Some(h) = &outcome.halted {
                eprintln!("training halted early: {h}");
            }
        }
        Command::PriceIs { checkpoint } => {
            let config = load(c)?;
            fs::create_dir_all(out)?;
            let r = config.resolve().map_err(|e| pipeline::record_error(out, "resolve", e))?;
            if c.dry_run {
                return Ok(());
            }
            let path = checkpoint.clone().unwrap_or_else(|| out.join("checkpoint.txt"));
            let net = ShallowNet::load(&path)?;
            let reports =
                pipeline::price_importance(&r, &net).map_err(|e| pipeline::record_error(out, "importance", e))?;
            pipeline::emit(out, "importance", &reports, &formats(c, &config))?;
            print_reports(&reports);
        }
        Command::Compare { plain, importance } => {
            let plain = read_reports(&plain.clone().unwrap_or_else(|| out.join("plain.json")))?;
            let weighted = read_reports(&importance.clone().unwrap_or_else(|| out.join("importance.json")))?;
            let rows = pipeline::compare_all(&plain, &weighted)?;
            let fmts = match c.format {
                Some(f) => vec![f.into()],
                None => vec![Format::Csv, Format::Json],
            };
            fs::create_dir_all(out)?;
            pipeline::emit(out, "comparison", &rows, &fmts)?;
            print_rows(&rows);
        }
        Command::Run => {
            let config = load(c)?;
            let options = RunOptions {
                dry_run: c.dry_run,
                formats: c.format.map(|f| vec![f.into()]),
                dump_paths: c.dump_paths,
            };
            let s = pipeline::run(&config, out, &options)?;
            if let Some(h) = &s.halted {
                eprintln!("training halted early: {h}");
            }
            if !s.rows.is_empty() {
                print_rows(&s.rows);
            }
        }
    }
    Ok(())
}
