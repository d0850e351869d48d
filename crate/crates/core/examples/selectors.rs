//! The selection procedures side by side on one data set, with their traces.

use nalgebra::DVector;
use posi::enumerate_subsets;
use posi::selectors::{forward_stepwise, lar_steps, max_t, significance_hunting, Family, SelectionResult};
use posi::sim::{gen_design, gen_errors, DesignSpec, ErrorDist};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(name: &str, r: &SelectionResult) {
    let focus = r.focus_column().map(|c| format!(", focus column {}", c + 1)).unwrap_or_default();
    println!("{name}: {}{focus}", r.selected);
    for t in r.trace.iter().take(5) {
        match &t.note {
            Some(note) => println!("    {:<12} skipped: {note}", t.model.to_string()),
            None => println!("    {:<12} {:.4}", t.model.to_string(), t.value),
        }
    }
}

fn main() -> posi::Result<()> {
    let (n, p) = (100, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = gen_design(&DesignSpec::independent(), n, p, &mut rng);
    let beta = DVector::from_vec(vec![0.0, 12.0, 0.0, -7.0, 0.0]);
    let y = x.values() * &beta + gen_errors(&ErrorDist::Laplace, n, &mut rng);
    let candidates = enumerate_subsets(p, 1, p, &[])?;

    show("LAR, 3 steps (trace: common correlation)", &lar_steps(&x, &y, 3)?);
    show("forward stepwise, 3 steps (trace: RSS)", &forward_stepwise(&x, &y, 3)?);
    show(
        "significance hunting, 5 best at lambda 2 (trace: penalized loglik)",
        &significance_hunting(&x, &y, &candidates, 5, 2.0, Family::Lm)?,
    );
    show("largest |t| for column 1 (trace: |t|)", &max_t(&x, &y, &candidates, 0, Family::Lm)?);
    Ok(())
}
