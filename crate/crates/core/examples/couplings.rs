//! Monotone couplings: ordered pairs stay ordered along every trajectory.

use sandpile1d::sim::{
    estimate_nested_gap, order_violations, random_ordered_pair, sample_rng, simulate_coupled, Coupling, SemigroupParams,
};
use sandpile1d::HeightConfig;

fn main() -> sandpile1d::Result<()> {
    let mut rng = sample_rng(5, 0);
    for coupling in [Coupling::Avalanche, Coupling::Birth { n: 4 }, Coupling::NestedBirth { n: 4 }] {
        let mut violations = 0;
        let mut events = 0;
        for seed in 0..500 {
            let (upper, lower) = random_ordered_pair(6, 0.5, &mut rng);
            let traj = simulate_coupled(coupling, &upper, &lower, 2.0, seed)?;
            events += traj.events.len();
            violations += order_violations(&traj)?;
        }
        println!("{coupling:?}: {events} events over 500 runs, {violations} order violations");
    }

    let p = SemigroupParams { t: 1.0, n: 2, m: 3, samples: 20_000, seed: 11 };
    let gap =
        estimate_nested_gap(|eta: &HeightConfig| Ok(eta.get(0)? as f64 - 1.0), "occ0", &HeightConfig::all_ones(), &p)?;
    println!(
        "window 3 vs 2 at t = 1: {:.4} vs {:.4}, paired difference {:.4} +/- {:.4}",
        gap.upper.mean, gap.lower.mean, gap.difference.mean, gap.difference.stderr
    );
    Ok(())
}
