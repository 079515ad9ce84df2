mod commands;
mod opts;
mod report;
mod replay;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use commands::{Failure, Outcome};
use opts::{Cli, Opts, RunConfig};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let start = Instant::now();
    let code = match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    eprintln!("wall time {:.3} s", start.elapsed().as_secs_f64());
    ExitCode::from(code as u8)
}

fn read_config(path: &Path) -> Outcome<Opts> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("bad config {}: {e}", path.display())))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Outcome<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Outcome<i32> {
    let file = match &cli.opts.config {
        Some(path) => read_config(path)?,
        None => Opts::default(),
    };
    let opts = cli.opts.over(file);
    if let Some(path) = &opts.replay {
        let rep = replay::replay(path)?;
        emit(&rep, opts.out.as_deref())?;
        return Ok(rep.exit_code());
    }
    let group = cli.group.ok_or_else(|| Failure::usage("no subcommand given (see --help)"))?;
    let cfg = RunConfig::resolve(&opts, group.name()).map_err(Failure::usage)?;
    let (rep, table) = commands::run(group, &cfg)?;
    match (&opts.csv, table) {
        (Some(path), Some(t)) => t.write(path)?,
        (Some(_), None) => eprintln!("note: {} has no curve output; --csv ignored", group.name()),
        _ => {}
    }
    emit(&rep, opts.out.as_deref())?;
    Ok(rep.exit_code())
}
