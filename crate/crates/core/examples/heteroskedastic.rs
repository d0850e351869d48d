//! With heteroskedastic errors the homoskedastic interval is too short where
//! the noise is large. The sandwich version uses the universal bound B instead.

use nalgebra::DVector;
use posi::hetlm::ci_hlm;
use posi::lm::{ci_lm, posi_constant_lm};
use posi::sim::{gen_design, DesignSpec};
use posi::{enumerate_subsets, CandidateModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> posi::Result<()> {
    let (n, p, alpha) = (200, 4, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = gen_design(&DesignSpec::independent(), n, p, &mut rng);
    let v = x.values();
    // Noise sd grows with |x1|.
    let y = DVector::from_fn(n, |i, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        30.0 * v[(i, 0)] - 20.0 * v[(i, 1)] + (0.02 + 20.0 * v[(i, 0)].abs()) * z
    });

    let candidates = enumerate_subsets(p, 1, p, &[])?;
    let selected = CandidateModel::parse_one_based("1,2")?;
    let k = posi_constant_lm(&x, &candidates, alpha, 20_000, 3)?;
    let homo = ci_lm(&x, &y, &candidates, alpha, &selected, &k)?;
    let het = ci_hlm(&x, &y, &candidates, alpha, &selected)?;
    println!("model {selected}: K = {:.3}, B = {:.3}", k.value, het.intervals[0].constant);
    for (a, b) in homo.intervals.iter().zip(&het.intervals) {
        println!(
            "{:>4}  estimate {:>7.3}   homoskedastic se {:.3} width {:.3}   sandwich se {:.3} width {:.3}",
            a.name,
            a.estimate,
            a.stderr,
            a.width(),
            b.stderr,
            b.width()
        );
    }
    Ok(())
}
