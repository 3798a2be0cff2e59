use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rlstd_core::harness::{
    self, csv, run_acrobot_experiment, run_cartpole_experiment, run_prediction_experiment, Algorithm,
    ConfigOverrides, ControlResult, Experiment, ExperimentConfig,
};
use rlstd_core::Error;

/// RLS-TD(λ) prediction and Fast-AHC control experiments.
#[derive(Parser, Debug)]
#[command(name = "rlstd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hop-World learning curves.
    Predict(Flags),
    /// Cart-pole balancing.
    Cartpole(Flags),
    /// Acrobot swing-up.
    Acrobot(Flags),
    /// Print the exact Hop-World TD fixed point for each λ.
    Oracle(Flags),
    /// Print the Hop-World approximation error bound for each λ.
    Bound(Flags),
}

#[derive(Args, Debug, Clone, Default)]
struct Flags {
    /// TOML file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "algo")]
    algorithm: Option<Algorithm>,
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    lambda: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Per-trial step cap.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Per-trial log of the control runs.
    #[arg(long)]
    episodes: Option<PathBuf>,
    /// State and action time series of the first successful control run.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Result<ConfigOverrides> {
        let file = match &self.config {
            Some(path) => ConfigOverrides::load(path)?,
            None => ConfigOverrides::default(),
        };
        let flags = ConfigOverrides {
            algorithm: self.algorithm,
            lambda_grid: self.lambda.clone(),
            gamma: self.gamma,
            mu: self.mu,
            delta: self.delta,
            runs: self.runs,
            trials: self.trials,
            seed: self.seed,
            output_path: self.out.clone(),
            max_steps: self.max_steps,
            episodes_path: self.episodes.clone(),
            trace_path: self.trace.clone(),
            ..Default::default()
        };
        Ok(file.merge(flags))
    }

    fn resolve(&self, experiment: Experiment) -> Result<ExperimentConfig> {
        let mut o = self.overrides()?;
        if o.experiment.is_some_and(|e| e != experiment) {
            return Err(Error::Config(format!("config file is for {:?}", o.experiment.unwrap())).into());
        }
        o.experiment = Some(experiment);
        Ok(ExperimentConfig::resolve(o, experiment)?)
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn predict(flags: &Flags) -> Result<()> {
    let cfg = flags.resolve(Experiment::HopworldPrediction)?;
    let result = run_prediction_experiment(&cfg)?;
    let mut out = open_output(cfg.output_path.as_deref())?;
    csv::write_prediction_csv(&mut out, &result)?;
    out.flush()?;
    for &l in &cfg.lambda_grid {
        eprintln!(
            "{} lambda={l}: mean rms at trial {} = {:.6}, over first {} trials = {:.6}",
            cfg.algorithm,
            cfg.trials,
            result.mean_rms(l, cfg.trials).unwrap_or(f64::NAN),
            cfg.window.min(cfg.trials),
            result.window_mean(l, cfg.window).unwrap_or(f64::NAN),
        );
    }
    Ok(())
}

fn control(flags: &Flags, experiment: Experiment) -> Result<()> {
    let cfg = flags.resolve(experiment)?;
    let result: ControlResult = match experiment {
        Experiment::CartpoleControl => run_cartpole_experiment(&cfg)?,
        _ => run_acrobot_experiment(&cfg)?,
    };
    let mut out = open_output(cfg.output_path.as_deref())?;
    csv::write_control_csv(&mut out, &result)?;
    out.flush()?;
    if let Some(path) = &cfg.episodes_path {
        write_file(path, |w| csv::write_episodes_csv(w, &result))?;
    }
    if let Some(path) = &cfg.trace_path {
        match &result.trace {
            Some(records) => write_file(path, |w| csv::write_trace_csv(w, experiment, records))?,
            None => eprintln!("no successful run; {} not written", path.display()),
        }
    }
    for &l in &cfg.lambda_grid {
        let mut m = result.metrics(l);
        m.sort_by(f64::total_cmp);
        let success = match experiment {
            Experiment::CartpoleControl => rlstd_core::actor_critic::Termination::SuccessCap,
            _ => rlstd_core::actor_critic::Termination::Goal,
        };
        eprintln!(
            "{} lambda={l} delta={}: {}/{} runs succeeded, median metric {}",
            cfg.algorithm,
            cfg.delta,
            result.successes(l, success),
            m.len(),
            m[m.len() / 2]
        );
    }
    Ok(())
}

fn fmt_weight(x: f64) -> String {
    let r = (x * 1e9).round() / 1e9;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

fn oracle(flags: &Flags) -> Result<()> {
    let o = flags.overrides()?;
    let lambdas = o.lambda_grid.unwrap_or_else(|| vec![0.0, 0.3, 0.5, 1.0]);
    let gamma = o.gamma.unwrap_or(1.0);
    let mut out = open_output(o.output_path.as_deref())?;
    for (l, w) in harness::hopworld_oracle(&lambdas, gamma)? {
        let ws: Vec<String> = w.iter().map(|&x| fmt_weight(x)).collect();
        writeln!(out, "lambda={l} gamma={gamma} W* = [{}]", ws.join(", "))?;
    }
    out.flush()?;
    Ok(())
}

fn bound(flags: &Flags) -> Result<()> {
    let o = flags.overrides()?;
    let lambdas = o.lambda_grid.unwrap_or_else(|| (0..=10).map(|i| i as f64 / 10.0).collect());
    let gamma = o.gamma.unwrap_or(0.9);
    let mut out = open_output(o.output_path.as_deref())?;
    writeln!(out, "lambda,gamma,lhs,rhs,holds")?;
    for (l, b) in harness::hopworld_bound_table(&lambdas, gamma)? {
        writeln!(
            out,
            "{},{},{},{},{}",
            csv::format_float(l),
            csv::format_float(gamma),
            csv::format_float(b.lhs),
            csv::format_float(b.rhs),
            b.holds
        )?;
    }
    out.flush()?;
    Ok(())
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Config(_) | Error::Domain(_))))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Predict(f) => predict(f),
        Command::Cartpole(f) => control(f, Experiment::CartpoleControl),
        Command::Acrobot(f) => control(f, Experiment::AcrobotControl),
        Command::Oracle(f) => oracle(f),
        Command::Bound(f) => bound(f),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
