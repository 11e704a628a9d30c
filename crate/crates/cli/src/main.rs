mod failure;
mod output;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rbce::dss::{dss_summarize, DssOptions};
use rbce::model::{standardize, Dataset, HierarchicalPrior};
use rbce::refit::{refit, RefitSpec};
use rbce::robust::{aggregate_draws, elicit_prior_set, sensitivity_draws, SensitivityResult};
use rbce::simbench::{run_study, Case, Magnitudes, StudyConfig};

use failure::{Failure, Kind};
use output::Staged;
use settings::{ModelFlags, Settings};

#[derive(Debug, Parser)]
#[command(name = "rbce", version, about = "Robust Bayesian causal-effect estimation with confounder selection")]
struct Cli {
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, global = true, env = "RBCE_THREADS")]
    threads: Option<usize>,
    /// JSON file with default values for the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Elicit the prior set and run one chain per grid point.
    Fit {
        /// CSV with columns `y,t,<predictors>`.
        #[arg(long)]
        data: PathBuf,
        /// Sensitivity result (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Directory for one draw CSV per grid point.
        #[arg(long)]
        draws: Option<PathBuf>,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Sparsify the posterior means of a fit.
    Dss {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Explained-variation tolerance for the penalty choice.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Slab-only chain on a fixed support.
    Refit {
        #[arg(long)]
        data: PathBuf,
        /// Outcome-side predictors, by name or 1-based index.
        #[arg(long, value_delimiter = ',')]
        keep_beta: Vec<String>,
        /// Treatment-side predictors, by name or 1-based index.
        #[arg(long, value_delimiter = ',')]
        keep_gamma: Vec<String>,
        /// Draw CSV.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Run a simulation study and write its tables.
    Simulate {
        /// 1a, 1b, 2a or 2b.
        #[arg(long)]
        case: Option<Case>,
        /// Comma-separated values of n (cases 1x) or p (cases 2x).
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Draw nonzero truth magnitudes from U(0.5, 1.5).
        #[arg(long)]
        uniform_magnitudes: bool,
        #[arg(long)]
        c_low: Option<f64>,
        #[arg(long)]
        c_high: Option<f64>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Melt the study tables into one long CSV for plotting.
    Report {
        #[arg(long)]
        study_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

const TABLES: [&str; 3] = ["estimation", "dispersion", "selection"];

fn load_data(path: &Path) -> Result<Dataset, Failure> {
    Dataset::from_csv_path(path).map_err(|e| Failure::new(Kind::BadData, format!("{}: {e}", path.display())))
}

fn predictor_index(token: &str, names: &[String]) -> Result<usize, Failure> {
    if let Some(j) = names.iter().position(|n| n == token) {
        return Ok(j);
    }
    match token.parse::<usize>() {
        Ok(j) if (1..=names.len()).contains(&j) => Ok(j - 1),
        _ => Err(Failure::new(Kind::BadConfig, format!("unknown predictor `{token}`"))),
    }
}

fn fit(settings: &Settings, data: &Path, out: &Path, draws_dir: Option<&Path>) -> Result<Staged, Failure> {
    let raw = load_data(data)?;
    let std = standardize(&raw, settings.preprocessing)?;
    let set = elicit_prior_set(&std.inner.x, &std.inner.y, settings.c_low, settings.c_high, settings.grid)?;
    let prior = settings.prior(raw.p())?;
    let chains = sensitivity_draws(&std, &prior, &set, &settings.sampler())?;
    let result = aggregate_draws(&std, &prior, &set, &chains)?;
    log::info!(
        "prior set [{:.4}, {:.4}]: {} selected, {} rejected, {} indeterminate",
        set.q_low,
        set.q_high,
        result.count(rbce::robust::Decision::Select),
        result.count(rbce::robust::Decision::Reject),
        result.count(rbce::robust::Decision::Abstain)
    );
    let mut staged = Staged::default();
    staged.add(out, result.to_json()?.into_bytes());
    if let Some(dir) = draws_dir {
        for (k, chain) in chains.iter().enumerate() {
            staged.add_with(dir.join(format!("draws_q{k:02}.csv")), |b| chain.write_csv(b))?;
        }
    }
    Ok(staged)
}

fn dss(fit_path: &Path, data: &Path, out: &Path, rho: Option<f64>, settings: &Settings) -> Result<Staged, Failure> {
    let text = std::fs::read_to_string(fit_path).map_err(|e| Failure::new(Kind::BadData, format!("{}: {e}", fit_path.display())))?;
    let fit = SensitivityResult::from_json(&text).map_err(|e| Failure::new(Kind::BadData, format!("{}: {e}", fit_path.display())))?;
    let raw = load_data(data)?;
    if raw.names.len() != fit.predictors.len() {
        return Err(Failure::new(Kind::BadData, "data and fit have different predictor counts"));
    }
    let std = standardize(&raw, fit.preprocessing)?;
    let opts = DssOptions { rho: rho.unwrap_or(settings.rho), ..DssOptions::default() };
    let result = dss_summarize(&fit, &std, opts)?;
    let mut staged = Staged::default();
    staged.add_with(out, |b| result.write_csv(b))?;
    Ok(staged)
}

fn run_refit(settings: &Settings, data: &Path, keep_beta: &[String], keep_gamma: &[String], out: &Path) -> Result<Staged, Failure> {
    let raw = load_data(data)?;
    let std = standardize(&raw, settings.preprocessing)?;
    let idx = |v: &[String]| v.iter().filter(|s| !s.is_empty()).map(|s| predictor_index(s, &raw.names)).collect::<Result<Vec<_>, _>>();
    let spec = RefitSpec::new(idx(keep_beta)?, idx(keep_gamma)?);
    let prior: HierarchicalPrior = settings.prior(raw.p())?;
    let draws = refit(&std, &spec, &prior, &settings.sampler())?;
    let mut staged = Staged::default();
    staged.add_with(out, |b| draws.write_csv(b))?;
    Ok(staged)
}

fn simulate(cfg: &StudyConfig, out_dir: &Path) -> Result<Staged, Failure> {
    let result = run_study(cfg)?;
    let mut staged = Staged::default();
    staged.add_with(out_dir.join("estimation.csv"), |b| result.write_estimation_csv(b))?;
    staged.add_with(out_dir.join("dispersion.csv"), |b| result.write_dispersion_csv(b))?;
    staged.add_with(out_dir.join("selection.csv"), |b| result.write_selection_csv(b))?;
    staged.add_with(out_dir.join("replicates.csv"), |b| result.write_long_csv(b))?;
    staged.add(out_dir.join("study.json"), serde_json::to_vec_pretty(&result.config).expect("config serialises"));
    Ok(staged)
}

/// `table, <grid label>, grid_value, quantity, value` rows from the three
/// study tables.
fn report(study_dir: &Path, out: &Path) -> Result<Staged, Failure> {
    let bad = |p: &Path, e: &dyn std::fmt::Display| Failure::new(Kind::BadData, format!("{}: {e}", p.display()));
    let mut buf = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut buf);
        wtr.write_record(["table", "grid_label", "grid_value", "quantity", "value"]).map_err(|e| bad(out, &e))?;
        for table in TABLES {
            let path = study_dir.join(format!("{table}.csv"));
            let mut rdr = csv::Reader::from_path(&path).map_err(|e| bad(&path, &e))?;
            let header = rdr.headers().map_err(|e| bad(&path, &e))?.clone();
            let label = header.get(0).ok_or_else(|| bad(&path, &"empty header"))?.to_string();
            for rec in rdr.records() {
                let rec = rec.map_err(|e| bad(&path, &e))?;
                for (k, name) in header.iter().enumerate().skip(1) {
                    wtr.write_record([table, &label, &rec[0], name, &rec[k]]).map_err(|e| bad(out, &e))?;
                }
            }
        }
        wtr.flush().map_err(|e| bad(out, &e))?;
    }
    let mut staged = Staged::default();
    staged.add(out, buf);
    Ok(staged)
}

fn study_config(cli_cfg: Option<&Path>, cmd: &Command) -> Result<StudyConfig, Failure> {
    let Command::Simulate { case, grid, replicates, seed, uniform_magnitudes, c_low, c_high, burn_in, samples, .. } = cmd else {
        unreachable!()
    };
    let mut cfg = match cli_cfg {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::new(Kind::BadConfig, format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::new(Kind::BadConfig, format!("config {}: {e}", path.display())))?
        }
        None => StudyConfig::default(),
    };
    if let Some(c) = case {
        cfg.case = *c;
        if grid.is_none() && cli_cfg.is_none() {
            cfg.grid = c.default_grid();
        }
    }
    if let Some(g) = grid {
        cfg.grid = g.clone();
    }
    settings_set(&mut cfg.replicates, *replicates);
    settings_set(&mut cfg.master_seed, *seed);
    settings_set(&mut cfg.c_low, *c_low);
    settings_set(&mut cfg.c_high, *c_high);
    settings_set(&mut cfg.burn_in, *burn_in);
    settings_set(&mut cfg.samples, *samples);
    if *uniform_magnitudes {
        cfg.magnitudes = Magnitudes::Uniform;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn settings_set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(Kind::BadConfig, format!("thread pool: {e}")))?;
    }
    let cfg_path = cli.config.as_deref();
    let staged = match &cli.command {
        Command::Fit { data, out, draws, model } => fit(&Settings::load(cfg_path)?.apply(model), data, out, draws.as_deref())?,
        Command::Dss { fit, data, out, rho } => dss(fit, data, out, *rho, &Settings::load(cfg_path)?)?,
        Command::Refit { data, keep_beta, keep_gamma, out, model } => {
            run_refit(&Settings::load(cfg_path)?.apply(model), data, keep_beta, keep_gamma, out)?
        }
        cmd @ Command::Simulate { out_dir, .. } => simulate(&study_config(cfg_path, cmd)?, out_dir)?,
        Command::Report { study_dir, out } => report(study_dir, out)?,
    };
    staged.commit()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            eprintln!("{}", Failure::new(Kind::BadConfig, e.kind().to_string()).line());
            return ExitCode::from(Kind::BadConfig.exit_code());
        }
    };
    match execute(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(f.kind.exit_code())
        }
    }
}
