//! Absorption in large volumes: after a fixed time the origin is almost
//! surely critical, and enough excess mass always lands in the recurrent set.

use sandpile1d::exact::check_lemma_excess;
use sandpile1d::sim::estimate_absorption;

fn main() -> sandpile1d::Result<()> {
    for n in [5, 10, 25, 50] {
        let est = estimate_absorption(n, 14.0, 5_000, 2)?;
        println!(
            "n = {n:3}: P(origin has height 1 at t = 14) = {:.5} +/- {:.5}   (1/(2n+1) = {:.5})",
            est.mean,
            est.stderr,
            1.0 / (2 * n + 1) as f64
        );
    }
    for n in [4, 10, 20] {
        let report = check_lemma_excess(n, 200, 6)?;
        println!("n = {n}: {} fields with central excess, {} not recurrent", report.trials, report.violations.len());
    }
    Ok(())
}
