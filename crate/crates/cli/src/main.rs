use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jumpsem::config::{self, Candidate, ExperimentConfig};
use jumpsem::criteria::{Criterion, CriterionValue};
use jumpsem::estimation::{self, FitConfig, InitStrategy};
use jumpsem::experiment;
use jumpsem::quasi_lik::{TruncationRule, TruncationStats};
use jumpsem::simulator::{self, SimConfig};
use jumpsem::{data, sem, Error};

#[derive(Parser)]
#[command(name = "jumpsem", version, about = "SEM model selection for high-frequency data with jumps")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Truncation {
    /// Threshold scale D.
    #[arg(long, default_value_t = 10.0)]
    d: f64,
    /// Threshold exponent rho, in [1/3, 1/2).
    #[arg(long, default_value_t = 0.4)]
    rho: f64,
}

impl Truncation {
    fn rule(&self) -> Result<TruncationRule, Error> {
        Ok(TruncationRule::new(self.d, self.rho)?)
    }
}

#[derive(clap::Args)]
struct Start {
    /// Starting point: `spec` (the model's [init] values), `default`
    /// (data-driven), or a file of numbers.
    #[arg(long, default_value = "spec")]
    init_from: String,
    /// Use K starts (the data-driven default plus K-1 perturbations).
    #[arg(long, value_name = "K")]
    multi_start: Option<usize>,
    /// Seed for the multi-start perturbations.
    #[arg(long, default_value_t = 0)]
    start_seed: u64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
}

impl Start {
    fn init(&self, model: &config::ModelFile) -> Result<InitStrategy, Error> {
        if let Some(count) = self.multi_start {
            return Ok(InitStrategy::MultiStart { count, seed: self.start_seed });
        }
        match self.init_from.as_str() {
            "spec" => match &model.init {
                Some(t) => Ok(InitStrategy::GivenPoint(t.clone())),
                None => Ok(InitStrategy::MultiStart { count: 1, seed: self.start_seed }),
            },
            "default" => Ok(InitStrategy::MultiStart { count: 1, seed: self.start_seed }),
            file => Ok(InitStrategy::GivenPoint(read_theta(Path::new(file))?)),
        }
    }

    fn fit_config(&self) -> FitConfig {
        FitConfig {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            ..FitConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path of the data-generating model and write it as CSV.
    Simulate {
        /// Built-in data-generating model.
        #[arg(long, default_value = "paper", conflicts_with = "config")]
        preset: String,
        /// Data-generating model file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        /// Terminal time T.
        #[arg(long = "t", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one model to a data file.
    Fit {
        /// Model file or preset (model1, model2, model3).
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        truncation: Truncation,
        #[command(flatten)]
        start: Start,
    },
    /// Fit several models and select by QBIC and QAIC.
    Select {
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<String>,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        truncation: Truncation,
        #[command(flatten)]
        start: Start,
    },
    /// Run a replicated selection study.
    Experiment {
        /// Experiment file; without it the built-in study is run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the number of replications.
        #[arg(long)]
        reps: Option<usize>,
        /// Override the sample-size grid.
        #[arg(long, num_args = 1..)]
        n_grid: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the counts as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical rank of the volatility Jacobian at a parameter value.
    RankCheck {
        #[arg(long)]
        model: String,
        /// `spec` (the model's [init] values) or a file of numbers.
        #[arg(long, default_value = "spec")]
        theta: String,
    },
}

fn read_theta(path: &Path) -> Result<Vec<f64>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    Ok(config::parse_theta(&text, &path.display().to_string())?)
}

/// 17 significant digits, enough to reproduce every value exactly.
fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|&x| g17(x)).collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { preset, config, n, t_end, seed, out } => {
            let model = match config {
                Some(path) => config::parse_true_model(&config::Document::read(&path)?)?,
                None => config::load_true_model(&preset)?,
            };
            let path = simulator::simulate_observations(&model, &SimConfig { n, t_end, seed })?;
            data::write_csv_file(&path, &out)?;
            println!("wrote {} rows of {} observables to {}", n + 1, path.p(), out.display());
        }
        Command::Fit { model, data: data_path, truncation, start } => {
            let m = config::load_model(&model)?;
            let path = data::read_csv_file(&data_path)?;
            let stats = TruncationStats::compute(&path, &truncation.rule()?);
            let cfg = FitConfig {
                init: start.init(&m)?,
                ..start.fit_config()
            };
            let r = estimation::fit(&m.spec, &stats, &cfg)?;
            let q = m.spec.q();
            let cv = CriterionValue::new(0, r.h_value, q, stats.n(), r.converged);
            println!("model       {}", m.name.as_deref().unwrap_or(&model));
            println!("n           {}", stats.n());
            println!("kept        {}", stats.n_kept());
            println!("q           {q}");
            println!("H           {}", g17(r.h_value));
            println!("QBIC        {}", g17(cv.qbic));
            println!("QAIC        {}", g17(cv.qaic));
            println!("converged   {} ({:?})", r.converged, r.stop_reason);
            println!("iterations  {}", r.iterations);
            println!("grad norm   {}", g17(r.grad_norm));
            println!("theta       {}", fmt_vec(r.theta_hat.values()));
        }
        Command::Select { models, data: data_path, truncation, start } => {
            let path = data::read_csv_file(&data_path)?;
            let mut candidates = Vec::new();
            for name in &models {
                let m = config::load_model(name)?;
                candidates.push(Candidate {
                    name: m.name.clone().unwrap_or_else(|| name.clone()),
                    init: start.init(&m)?,
                    spec: m.spec,
                });
            }
            let cmp = experiment::compare_on_path(&candidates, &path, &truncation.rule()?, &start.fit_config());
            println!("n = {}, kept = {}", cmp.n, cmp.n_kept);
            println!("{:>12} {:>4} {:>24} {:>24} {:>24}  converged", "model", "q", "H", "QBIC", "QAIC");
            let mut failure = None;
            for (id, c) in candidates.iter().enumerate() {
                match &cmp.fits[id] {
                    Ok(r) => {
                        let v = cmp.values.iter().find(|v| v.model_id == id).expect("fitted");
                        println!(
                            "{:>12} {:>4} {:>24} {:>24} {:>24}  {}",
                            c.name,
                            v.q,
                            g17(v.h_value),
                            g17(v.qbic),
                            g17(v.qaic),
                            r.converged
                        );
                    }
                    Err(e) => {
                        println!("{:>12} {:>4}  fit failed: {e}", c.name, c.spec.q());
                        failure.get_or_insert_with(|| e.clone());
                    }
                }
            }
            if let Some(e) = failure {
                return Err(e.into());
            }
            for crit in Criterion::ALL {
                let sel = cmp.selection(crit).expect("all fits succeeded");
                let note = if sel.tie { " (tie: smaller q, then earlier model, wins)" } else { "" };
                println!("{crit} selects {}{note}", candidates[sel.model_id].name);
            }
        }
        Command::Experiment { config: cfg_path, reps, n_grid, seed, out } => {
            let mut cfg = match cfg_path {
                Some(p) => config::load_experiment(&p)?,
                None => ExperimentConfig::paper_default(),
            };
            if let Some(r) = reps {
                cfg.replications = r;
            }
            if let Some(g) = n_grid {
                cfg.n_grid = g;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            cfg.validate().map_err(Error::Usage)?;
            let table = experiment::run_experiment(&cfg)?;
            print!("{}", table.to_text());
            if let Some(out) = out {
                std::fs::write(&out, table.to_csv()).map_err(|e| Error::Usage(format!("{}: {e}", out.display())))?;
            }
        }
        Command::RankCheck { model, theta } => {
            let m = config::load_model(&model)?;
            let values = match theta.as_str() {
                "spec" => m
                    .init
                    .clone()
                    .ok_or_else(|| Error::Usage("model has no [init] values; pass --theta FILE".into()))?,
                file => read_theta(Path::new(file))?,
            };
            let theta = sem::ThetaVector::new(&m.spec, values)?;
            let rank = sem::identifiability_rank(&m.spec, theta.values())?;
            let q = m.spec.q();
            println!("q           {q}");
            println!("rank        {rank}");
            println!("full rank   {}", rank == q);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
