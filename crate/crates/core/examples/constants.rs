//! The two critical values side by side: the Monte-Carlo K for a few
//! correlation structures and the universal bound B for a grid of (q, N).

use nalgebra::DMatrix;
use posi::constants::{b_alpha, k_quantile, upper_bound_k, CorrelationMatrix, DEFAULT_B_TOL};

fn main() -> posi::Result<()> {
    let alpha = 0.1;
    let cases = [
        ("independent, k = 3", DMatrix::identity(3, 3)),
        ("equicorrelated 0.5, k = 5", DMatrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { 0.5 })),
        ("perfectly correlated, k = 5", DMatrix::from_element(5, 5, 1.0)),
    ];
    println!("K_0.9 by Monte Carlo (200k draws) and the rank bound");
    for (label, m) in cases {
        let corr = CorrelationMatrix::new(m)?;
        let k = k_quantile(&corr, alpha, 200_000, 42)?;
        let b = upper_bound_k(&corr, alpha)?;
        println!("  {label:<30} K = {:.4} (se {:.4})   B(rank {}, {}) = {:.4}", k.value, k.mc_std_error, corr.rank(), corr.k(), b.value);
    }

    println!("\nB_0.1(q, N)");
    print!("{:>6}", "q\\N");
    let ns = [1, 5, 50, 500];
    for n in ns {
        print!("{n:>10}");
    }
    println!();
    for q in [1, 2, 5, 20, 100] {
        print!("{q:>6}");
        for n in ns {
            print!("{:>10.4}", b_alpha(q, n, alpha, DEFAULT_B_TOL)?.value);
        }
        println!();
    }

    let b = b_alpha(200, 200, 0.05, DEFAULT_B_TOL)?.value;
    let asym = (200.0 * (1.0 - 200f64.powf(-2.0 / 199.0))).sqrt();
    println!("\nB_0.05(200, 200) = {b:.4}; large-q approximation sqrt(q(1 - N^(-2/(q-1)))) = {asym:.4}");
    Ok(())
}
