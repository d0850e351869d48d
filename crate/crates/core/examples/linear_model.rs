//! Fit a linear model after forward stepwise selection and compare the POSI
//! intervals with the textbook t-style intervals that ignore the selection.

use nalgebra::DVector;
use posi::lm::{ci_individual, ci_lm, ols, posi_constant_lm, xi_matrix};
use posi::selectors::forward_stepwise;
use posi::sim::{gen_design, gen_errors, DesignSpec, ErrorDist};
use posi::{enumerate_subsets, PosiConstant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> posi::Result<()> {
    let (n, p, alpha) = (80, 6, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = gen_design(&DesignSpec::correlated(), n, p, &mut rng);
    let beta = DVector::from_vec(vec![12.0, -9.0, 0.0, 0.0, 6.0, 0.0]);
    let y = x.values() * &beta + gen_errors(&ErrorDist::Normal, n, &mut rng);

    // Every nonempty submodel is a candidate.
    let candidates = enumerate_subsets(p, 1, p, &[])?;
    let selection = forward_stepwise(&x, &y, 3)?;
    println!("forward stepwise picked {} from {} candidates", selection.selected, candidates.len());

    let k = posi_constant_lm(&x, &candidates, alpha, 20_000, 1)?;
    let posi = ci_lm(&x, &y, &candidates, alpha, &selection.selected, &k)?;
    let naive = PosiConstant::naive(alpha)?;
    let fit = ols(&x, &selection.selected, &y)?;
    let vars = fit.variances();
    println!("K = {:.3} (z = {:.3})", k.value, naive.value);
    println!("{:>6} {:>9} {:>22} {:>22}", "coef", "estimate", "POSI", "naive");
    for (i, iv) in posi.intervals.iter().enumerate() {
        let half = vars[i].sqrt() * naive.value;
        println!(
            "{:>6} {:>9.3} [{:>9.3}, {:>9.3}] [{:>9.3}, {:>9.3}]",
            iv.name, iv.estimate, iv.lower, iv.upper, iv.estimate - half, iv.estimate + half
        );
    }

    // Inference on a single coefficient that every candidate keeps.
    let forced = enumerate_subsets(p, 1, p, &[0])?;
    let xi = posi::k_quantile(&xi_matrix(&x, &forced, 0)?, alpha, 20_000, 1)?;
    let selected = if selection.selected.contains(0) { selection.selected.clone() } else { forced.models()[0].clone() };
    let one = ci_individual(&x, &y, &forced, alpha, &selected, 0, &xi)?;
    let iv = &one.intervals[0];
    println!("\nfirst coefficient only: K(Xi) = {:.3}, interval [{:.3}, {:.3}]", xi.value, iv.lower, iv.upper);
    Ok(())
}
