use clap::error::ErrorKind;
use clap::Parser;

use certkit::cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not errors.
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(3);
        }
    };
    match run(&cli) {
        Ok((report, code)) => {
            let flat = report.to_flat();
            print!("{flat}");
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, &flat) {
                    println!("error cannot write report: {e}");
                    std::process::exit(3);
                }
            }
            if let Some(path) = &cli.json {
                if let Err(e) = std::fs::write(path, report.to_json()) {
                    println!("error cannot write json report: {e}");
                    std::process::exit(3);
                }
            }
            std::process::exit(code);
        }
        Err(e) => {
            // Single-line machine-parsable error record.
            println!("error {e}");
            std::process::exit(3);
        }
    }
}
