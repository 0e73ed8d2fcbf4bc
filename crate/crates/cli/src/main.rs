mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use cmbp::engine::{monte_carlo, write_trajectories_csv, Collect, McConfig, SimOptions, Trajectory};
use cmbp::limit::{euler_maruyama_stream, gamma_marginal, write_sde_csv, GammaMarginal};
use cmbp::model::presets::Preset;
use cmbp::model::{classify, limit_coefficients_with_band};
use cmbp::verify::run_suite;
use serde_json::json;

use config::{ParseError, RunConfig};

#[derive(Parser)]
#[command(name = "cmbp", version, about = "Controlled multi-type branching processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a model as sub-, super- or critical.
    Classify(Common),
    /// Simulate trajectories and write them as CSV.
    Simulate(Common),
    /// Limit coefficients and Gamma marginal as JSON, SDE paths as CSV.
    Limit(Common),
    /// Run the verification suite on a critical model.
    Verify(Common),
    /// Built-in presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Print every preset with its default parameters.
    List,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overrides master_seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all available cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn threads(&self) -> Option<usize> {
        self.threads.map(|t| t as usize)
    }
}

enum Outcome {
    Ok,
    ChecksFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ParseError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Classify(a) => classify_cmd(&a),
        Command::Simulate(a) => simulate_cmd(&a),
        Command::Limit(a) => limit_cmd(&a),
        Command::Verify(a) => verify_cmd(&a),
        Command::Preset { action: PresetAction::List } => {
            print_json(&mut io::stdout().lock(), &Preset::defaults())?;
            Ok(Outcome::Ok)
        }
    }
}

fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json<W: Write + ?Sized, T: serde::Serialize>(w: &mut W, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn classify_cmd(a: &Common) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::load(&a.config)?;
    let model = cfg.model()?;
    let report = classify(&model, cfg.band());
    let mut w = sink(&a.out)?;
    print_json(&mut *w, &json!({ "model_hash": model.hash(), "report": report }))?;
    Ok(Outcome::Ok)
}

fn simulate_cmd(a: &Common) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::load(&a.config)?;
    let model = cfg.model()?;
    let Some(k) = cfg.k else {
        return Err(ParseError("simulate needs K, the number of generations".into()).into());
    };
    let mc = McConfig {
        steps: k,
        trajectories: cfg.trajectories.unwrap_or(1),
        master_seed: cfg.seed(a.seed)?,
        threads: a.threads(),
        options: SimOptions {
            naive_summation: cfg.naive_summation,
        },
    };
    let r = monte_carlo(&model, &mc, &Collect(|t: &Trajectory| t.clone()))?;
    let mut w = sink(&a.out)?;
    write_trajectories_csv(&mut w, &r.acc)?;
    w.flush()?;
    eprintln!(
        "simulated {} of {} trajectories, {} aborted by count overflow",
        r.completed,
        mc.trajectories,
        r.failures.len()
    );
    for (sid, e) in &r.failures {
        eprintln!("  trajectory {sid}: {e}");
    }
    Ok(Outcome::Ok)
}

fn limit_cmd(a: &Common) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::load(&a.config)?;
    let model = cfg.model()?;
    let coef = limit_coefficients_with_band(&model, cfg.band())?;
    let t_end = cfg.t_end.unwrap_or(1.0);
    let t = cfg.t.unwrap_or(t_end);
    let dt = cfg.dt.unwrap_or(1e-3);
    let marginal = gamma_marginal(coef.drift, coef.diffusion, t)?;
    let degenerate = matches!(marginal, GammaMarginal::DegenerateLine { .. });
    let mut summary = json!({
        "model_hash": model.hash(),
        "coefficients": coef,
        "t": t,
        "marginal": marginal,
        "degenerate": degenerate,
    });
    if let Some(out) = &a.out {
        let seed = cfg.seed(a.seed)?;
        let n_paths = cfg.paths.unwrap_or(1);
        let paths = (0..n_paths)
            .map(|id| Ok((id, euler_maruyama_stream(coef.drift, coef.diffusion, t_end, dt, seed, id)?)))
            .collect::<cmbp::Result<Vec<_>>>()?;
        let mut w = sink(&Some(out.clone()))?;
        write_sde_csv(&mut w, &paths)?;
        w.flush()?;
        summary["paths"] = json!({ "count": n_paths, "T": t_end, "dt": dt, "master_seed": seed });
    }
    print_json(&mut io::stdout().lock(), &summary)?;
    Ok(Outcome::Ok)
}

fn verify_cmd(a: &Common) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::load(&a.config)?;
    let model = cfg.model()?;
    let suite = cfg.suite(cfg.seed(a.seed)?, a.threads());
    let reports = run_suite(&model, &suite)?;
    let mut w = sink(&a.out)?;
    print_json(&mut *w, &reports)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    if failed.is_empty() {
        Ok(Outcome::Ok)
    } else {
        eprintln!("{} of {} checks failed: {}", failed.len(), reports.len(), failed.join(", "));
        Ok(Outcome::ChecksFailed)
    }
}
