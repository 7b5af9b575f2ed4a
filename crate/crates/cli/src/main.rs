use std::process::ExitCode;

use clap::Parser;
use moire_spectra::{execute, Cli, Verdict};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.resolve().map_err(anyhow::Error::from).and_then(|cfg| {
        let verdict = execute(&cfg)?;
        eprintln!(
            "{}: {:?}, results in {}",
            cfg.experiment.id(),
            verdict,
            cfg.out.display()
        );
        Ok(verdict)
    });
    match result {
        Ok(Verdict::Fail) => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
