//! The finite-volume pile two ways: event by event, and as the
//! stabilization of Poisson grain counts, compared with the exact law.

use sandpile1d::exact::{transient_distribution, Distribution, StateSpace};
use sandpile1d::sim::{fvsp_state, sample_all, simulate_fvsp_poisson};
use sandpile1d::HeightConfig;

fn main() -> sandpile1d::Result<()> {
    let ones = HeightConfig::all_ones();
    let traj = simulate_fvsp_poisson(2, &ones, 1.0, 4)?;
    println!("{} grains added on [-2, 2] before t = 1, final {}", traj.events.len(), traj.final_state()?.0);

    let (n, t) = (1, 0.5);
    let space = StateSpace::new(n)?;
    let states = sample_all(20_000, 8, |rng| space.index_of_config(&fvsp_state(n, &ones, t, rng)?.to_config()))?;
    let empirical = Distribution::empirical(space, &states);
    let exact = transient_distribution(n, space.index_of_config(&ones)?, t)?;
    println!("state  exact     empirical");
    for s in 0..space.len() {
        println!("{:?}  {:.5}   {:.5}", space.heights(s), exact.weights[s], empirical.weights[s]);
    }
    println!("total variation {:.4}", empirical.total_variation(&exact));
    Ok(())
}
