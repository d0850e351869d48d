//! Plugging a hand-written selection rule into the coverage harness.
//!
//! The rule keeps every column whose marginal correlation with y exceeds a
//! threshold, a screening step the built-in selectors do not offer.

use posi::selectors::FnSelector;
use posi::sim::{run_scenario_with, to_csv_string, ScenarioConfig};
use posi::CandidateModel;

fn main() -> posi::Result<()> {
    let config = ScenarioConfig::from_json_str(
        r#"{
            "scenario_id": "screening",
            "n": 60, "p": 6, "reps": 300, "seed": 9,
            "design": {"kind": "independent"},
            "beta": [6.0, 0.0, 3.0, 0.0, 0.0, 0.0],
            "family": "lm",
            "selector": {"kind": "forward_stepwise", "k": 1},
            "mc_draws": 5000
        }"#,
    )?;
    let screen = FnSelector(|x: &posi::DesignMatrix, y: &nalgebra::DVector<f64>| {
        // Columns are unit-norm, so X'y is proportional to the correlation.
        let xy = x.values().transpose() * y;
        let cutoff = 0.3 * y.norm();
        let keep: Vec<usize> = (0..x.p()).filter(|&j| xy[j].abs() > cutoff).collect();
        // Fall back to the single strongest column.
        CandidateModel::new(if keep.is_empty() { vec![xy.iamax()] } else { keep })
    });
    let report = run_scenario_with(&config, &screen)?;
    print!("{}", to_csv_string(std::slice::from_ref(&report))?);
    Ok(())
}
