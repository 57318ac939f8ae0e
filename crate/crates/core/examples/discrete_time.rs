//! The discrete-time pile: add one grain at a uniform site per step.

use sandpile1d::exact::{Distribution, StateSpace};
use sandpile1d::sim::{discrete_time_fvsp, sample_all};
use sandpile1d::HeightConfig;

fn main() -> sandpile1d::Result<()> {
    let n = 2;
    let space = StateSpace::new(n)?;
    let mu = Distribution::uniform_recurrent(n)?;
    for steps in [1, 5, 20, 80] {
        let states = sample_all(10_000, 1, |rng| {
            use rand::Rng;
            space.index_of_config(&discrete_time_fvsp(n, steps, &HeightConfig::all_ones(), rng.random())?)
        })?;
        let law = Distribution::empirical(space, &states);
        println!("{steps:3} steps: total variation to the uniform recurrent law {:.4}", law.total_variation(&mu));
    }
    Ok(())
}
