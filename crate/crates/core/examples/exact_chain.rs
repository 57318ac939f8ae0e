//! Exact analysis of the finite-volume chain: generator, stationary law,
//! reversibility and the unique-toppling bijection.

use sandpile1d::exact::{
    build_generator, check_unique_toppling_bijection, detailed_balance_deviation, recurrent_set,
    stationary_distribution, transient_distribution, Distribution, StateSpace,
};

fn main() -> sandpile1d::Result<()> {
    for n in 0..=3 {
        let pi = stationary_distribution(n)?;
        let mu = Distribution::uniform_recurrent(n)?;
        let bij = check_unique_toppling_bijection(n)?;
        println!(
            "n = {n}: {} states, {} recurrent, |pi - uniform| = {:.1e}, detailed balance {:.1e}, bijection holds: {}",
            StateSpace::new(n)?.len(),
            recurrent_set(n)?.len(),
            pi.max_abs_diff(&mu),
            detailed_balance_deviation(n)?,
            bij.holds()
        );
    }

    let q = build_generator(1)?;
    let csv = q.to_csv();
    println!("generator for n = 1, first entries (row,col,rate):");
    for line in csv.lines().take(8) {
        println!("  {line}");
    }
    for t in [0.5, 2.0, 8.0] {
        let p = transient_distribution(1, 0, t)?;
        println!("t = {t}: distance to uniform recurrent {:.2e}", p.max_abs_diff(&Distribution::uniform_recurrent(1)?));
    }
    Ok(())
}
