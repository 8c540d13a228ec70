use std::process::ExitCode;

use clap::Parser;
use qsample::cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(&cli));
    match result {
        Ok(out) => {
            let written = match &cli.out {
                Some(p) => std::fs::write(p, &out.text),
                None => {
                    print!("{}", out.text);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if out.certified {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: a certified bound does not hold");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                qsample::Error::Certification(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
