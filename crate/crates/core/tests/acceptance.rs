//! Runs the ten reference criteria and prints one verdict line each.

use std::process::ExitCode;
use std::time::Instant;

use symheat::acceptance::CRITERIA;

fn main() -> ExitCode {
    let filter: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, run) in CRITERIA {
        if filter.is_some_and(|f| f != id) {
            continue;
        }
        let start = Instant::now();
        match run() {
            Ok(report) => {
                if !report.passed() {
                    failed += 1;
                }
                println!("{report}");
                println!("    ({:.2?})", start.elapsed());
            }
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {id:>2}: error: {e}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
