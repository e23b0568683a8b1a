//! One line per acceptance criterion; exits non-zero if any fails.
//!
//! `HYBRIDFP_ACCEPTANCE_PARTICLES` shrinks the particle count for a quick
//! local look; the recorded outcome uses the default of 1e5.

use std::process::ExitCode;
use std::time::Instant;

use hybridfp_core::validation::{run_acceptance, AcceptanceOptions};

fn main() -> ExitCode {
    let mut options = AcceptanceOptions::default();
    if let Ok(n) = std::env::var("HYBRIDFP_ACCEPTANCE_PARTICLES") {
        options.n_particles = n.parse().expect("HYBRIDFP_ACCEPTANCE_PARTICLES must be an integer");
    }
    let start = Instant::now();
    let run = match run_acceptance(&options) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("acceptance run failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("acceptance ({} particles, seed {})", options.n_particles, options.seed);
    for c in &run.criteria {
        println!("{c}");
    }
    let failed = run.criteria.iter().filter(|c| !c.passed).count();
    println!(
        "{} of {} criteria passed in {:.1}s",
        run.criteria.len() - failed,
        run.criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
