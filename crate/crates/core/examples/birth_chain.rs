//! The process with births in a window: trajectories and semigroup
//! estimates for a local observable.

use sandpile1d::sim::{estimate_semigroup, simulate_ln, SemigroupParams};
use sandpile1d::HeightConfig;

fn main() -> sandpile1d::Result<()> {
    let ones = HeightConfig::all_ones();
    let traj = simulate_ln(3, &ones, 0.5, 9)?;
    println!("{} events on [-3, 3] before t = 0.5", traj.events.len());
    for t in [0.1, 0.25, 0.5] {
        println!("  state at {t}: {}", traj.state_at(t)?.0.trimmed());
    }

    let f = |eta: &HeightConfig| Ok(eta.get(0)? as f64 - 1.0);
    for t in [0.02, 0.1, 0.5] {
        let p = SemigroupParams { t, n: 10, m: 10, samples: 40_000, seed: 3 };
        let est = estimate_semigroup(f, "occ0", &ones, &p)?;
        println!("E[eta_t(0) - 1] at t = {t}: {:.5} +/- {:.5}", est.mean, est.stderr);
    }
    Ok(())
}
