//! Reads an LP file, solves it in-process and writes a `name value` solution.
//!
//! Usage: lpsolve <problem.lp> <solution.sol> [--gap G] [--time-limit S] [--backend builtin|highs]

use std::path::Path;
use std::process::ExitCode;

use rcuc_milp::{format_solution, read_lp, solve, Backend, BuiltinBackend, SolveOptions};

fn run(args: &[String]) -> Result<(), String> {
    let mut positional = Vec::new();
    let mut options = SolveOptions::default();
    let mut backend: Box<dyn Backend> = rcuc_milp::default_backend();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let mut value = |flag: &str| it.next().cloned().ok_or(format!("{flag} needs a value"));
        match a.as_str() {
            "--gap" => options.gap = value("--gap")?.parse().map_err(|e| format!("--gap: {e}"))?,
            "--time-limit" => {
                let t: f64 = value("--time-limit")?
                    .parse()
                    .map_err(|e| format!("--time-limit: {e}"))?;
                options.time_limit = Some(t);
            }
            "--backend" => {
                backend = match value("--backend")?.as_str() {
                    "builtin" => Box::new(BuiltinBackend::default()),
                    #[cfg(feature = "highs")]
                    "highs" => Box::new(rcuc_milp::HighsBackend::default()),
                    other => return Err(format!("unknown backend `{other}`")),
                }
            }
            _ => positional.push(a.clone()),
        }
    }
    let [lp, sol] = positional.as_slice() else {
        return Err("usage: lpsolve <problem.lp> <solution.sol> [--gap G] [--time-limit S] [--backend NAME]".into());
    };
    let problem = read_lp(Path::new(lp)).map_err(|e| format!("{lp}: {e}"))?;
    let result = solve(&problem, backend.as_ref(), &options).map_err(|e| e.to_string())?;
    std::fs::write(sol, format_solution(&problem, &result)).map_err(|e| format!("{sol}: {e}"))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lpsolve: {e}");
            ExitCode::from(2)
        }
    }
}
