use std::process::ExitCode;

use clap::Parser;

use hybridfp_cli::{run_cli, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap's own code for usage errors is 2, which we reserve for solver failures
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Ok(threads) = std::env::var("HYBRIDFP_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("HYBRIDFP_THREADS must be a positive integer, got '{threads}'");
                return ExitCode::from(1);
            }
        }
    }
    let mut stdout = std::io::stdout().lock();
    match run_cli(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hybridfp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
