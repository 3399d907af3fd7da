use std::process::ExitCode;

use efpp_harness::{parse_cli, run_experiment, write_outputs, CliError};

const USAGE: u8 = 2;
const RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let spec = match parse_cli(std::env::args_os()) {
        Ok(s) => s,
        Err(CliError::Clap(e)) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(USAGE);
        }
    };
    for w in &spec.warnings {
        eprintln!("warning: {w}");
    }
    let out = match run_experiment(&spec) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(RUNTIME);
        }
    };
    if let Err(e) = write_outputs(&out) {
        eprintln!("error writing output: {e}");
        return ExitCode::from(RUNTIME);
    }
    let s = &out.summary;
    eprint!("{}", s.table.to_csv());
    for (k, v) in &s.metrics {
        eprintln!("{k} = {}", efpp_harness::run::fmt(*v));
    }
    eprintln!("{} jobs, {} failed", s.jobs, s.failures);
    if let Some(e) = &s.error {
        eprintln!("error: {e}");
    }
    if s.aborted {
        eprintln!("aborted: more than a tenth of the replicates failed");
        return ExitCode::from(RUNTIME);
    }
    match s.pass {
        Some(true) => {
            eprintln!("PASS");
            ExitCode::SUCCESS
        }
        Some(false) => {
            eprintln!("FAIL");
            ExitCode::from(1)
        }
        None if s.error.is_some() => ExitCode::from(RUNTIME),
        None => ExitCode::SUCCESS,
    }
}
