use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rcuc_cli::commands::{
    cmd_datagen, cmd_simulate, cmd_solve, cmd_train, cmd_verify, format_verification, EventSpec,
};
use rcuc_cli::report::cmd_report;
use rcuc_cli::{exit_code, Failure, RunConfig, EXIT_FAILURE, EXIT_INPUT};
use rcuc_core::uc_milp::ModelVariant;
use rcuc_milp::{format_solution, read_lp, solve, Backend, BuiltinBackend, SolveOptions};

#[derive(Parser)]
#[command(name = "rcuc", version, about = "RoCoF-constrained unit commitment pipeline")]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    T,
    Erc,
    Lrc,
    Dnn,
}

impl From<Model> for ModelVariant {
    fn from(m: Model) -> Self {
        match m {
            Model::T => ModelVariant::T,
            Model::Erc => ModelVariant::Erc,
            Model::Lrc => ModelVariant::Lrc,
            Model::Dnn => ModelVariant::Dnn,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample scenarios, solve T/ERC/LRC, label by simulation, split.
    Datagen,
    /// Train the RoCoF predictor on the datagen split.
    Train,
    /// Solve one SCUC variant.
    Solve {
        #[arg(long, value_enum)]
        model: Model,
        /// Weight file for the DNN variant; defaults to <out>/weights.txt.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Simulate the G-1 event of every period of a solved schedule.
    Verify {
        #[arg(long, value_enum)]
        model: Model,
        /// Treat the committed units of this bus as one machine.
        #[arg(long)]
        aggregate_bus: Option<usize>,
    },
    /// Simulate one event on a solved schedule and write its trajectory.
    Simulate {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        period: usize,
        /// Tripped generator id; the largest committed unit by default.
        #[arg(long)]
        gen: Option<usize>,
        /// Power lost, MW; the tripped unit's dispatch by default.
        #[arg(long)]
        mw: Option<f64>,
    },
    /// Compare every solved and verified variant.
    Report,
    /// Solve an LP file in-process and write a `name value` solution, so the
    /// binary can serve as an external solver command.
    #[command(hide = true)]
    SolveLp {
        lp: PathBuf,
        sol: PathBuf,
        #[arg(long, default_value_t = rcuc_milp::DEFAULT_GAP)]
        gap: f64,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long, default_value = "highs")]
        backend: String,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn solve_lp(lp: &Path, sol: &Path, gap: f64, time_limit: Option<f64>, backend: &str) -> Result<()> {
    let backend: Box<dyn Backend> = match backend {
        "builtin" => Box::new(BuiltinBackend::default()),
        #[cfg(feature = "highs")]
        "highs" => Box::new(rcuc_milp::HighsBackend::default()),
        other => anyhow::bail!("unknown backend `{other}`"),
    };
    let problem = read_lp(lp).with_context(|| lp.display().to_string())?;
    let options = SolveOptions { gap, time_limit, ..SolveOptions::default() };
    let result = solve(&problem, backend.as_ref(), &options)?;
    std::fs::write(sol, format_solution(&problem, &result)).with_context(|| sol.display().to_string())
}

fn run(cli: Cli) -> Result<u8> {
    if let Cmd::SolveLp { lp, sol, gap, time_limit, backend } = &cli.command {
        solve_lp(lp, sol, *gap, *time_limit, backend)?;
        return Ok(0);
    }
    let cfg = load_config(&cli)?;
    match cli.command {
        Cmd::Datagen => {
            let s = cmd_datagen(&cfg)?;
            println!(
                "{} scenarios, {} solved schedules, {} samples ({} train / {} val)",
                s.scenarios, s.solved, s.samples, s.train, s.val
            );
            print!("{}", s.rejections);
        }
        Cmd::Train => {
            let s = cmd_train(&cfg)?;
            println!("{} epochs, best validation MSE {:.4e}", s.epochs, s.best_val_mse);
            println!("tolerance  train  val");
            for (tol, a, b) in &s.accuracy {
                println!("{:>8.0}%  {:.3}  {:.3}", tol * 100.0, a, b);
            }
        }
        Cmd::Solve { model, weights } => {
            let s = cmd_solve(&cfg, model.into(), weights.as_deref())?;
            let c = &s.costs;
            println!(
                "{}-SCUC {}: total {:.2} start-up {:.2} operation {:.2} reserves {:.2}",
                s.variant, s.outcome.status, c.total, c.startup, c.operation, c.reserves
            );
            for (t, r) in s.predicted.iter().enumerate() {
                println!("  period {} predicted RoCoF {:.4}", t + 1, r);
            }
        }
        Cmd::Verify { model, aggregate_bus } => {
            let r = cmd_verify(&cfg, model.into(), aggregate_bus)?;
            print!("{}", format_verification(&r));
            if r.has_violation() {
                return Err(Failure::Violation(format!("{} schedule exceeds {} Hz/s", r.model, r.limit)).into());
            }
        }
        Cmd::Simulate { model, period, gen, mw } => {
            let ev = EventSpec { variant: model.into(), period, gen, delta_mw: mw };
            let r = cmd_simulate(&cfg, &ev)?;
            println!(
                "event gen {} {:.1} MW: highest RoCoF {:.4} Hz/s at bus {}",
                r.event_gen.map_or("-".into(), |g| g.to_string()),
                r.event_mw,
                r.highest_rocof,
                r.highest_bus
            );
        }
        Cmd::Report => {
            let r = cmd_report(&cfg)?;
            print!("{}", r.text);
        }
        Cmd::SolveLp { .. } => unreachable!(),
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("rcuc: {e:#}");
            let code = exit_code(&e);
            debug_assert!(code == EXIT_FAILURE || code == EXIT_INPUT);
            ExitCode::from(code)
        }
    }
}
