//! Runs one of the shipped coverage-study presets and prints the report.
//!
//!     cargo run --release --example coverage_study -- table2 200

use posi::sim::{presets, run_scenario, to_csv_string};

fn main() -> posi::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "table2-nbest20-zero".into());
    let reps: Option<usize> = args.next().map(|s| s.parse().expect("reps must be an integer"));
    let mut scenarios = presets::find(&name).unwrap_or_else(|| panic!("unknown preset {name}"));
    let mut reports = Vec::new();
    for c in &mut scenarios {
        if let Some(r) = reps {
            c.reps = r;
        }
        let report = run_scenario(c)?;
        eprintln!("{}: {:.1?}", c.scenario_id, report.wall_time);
        reports.push(report);
    }
    print!("{}", to_csv_string(&reports)?);
    Ok(())
}
