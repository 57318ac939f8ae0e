//! Stabilizing grain fields in a finite volume, checked against a
//! brute-force relaxation in random order.

use rand::Rng;
use sandpile1d::sim::sample_rng;
use sandpile1d::{stabilize, stabilize_bruteforce, GrainField};

fn main() -> sandpile1d::Result<()> {
    let field: GrainField = "-3 3 1 4 1 2 6 1 3".parse()?;
    let stable = stabilize(3, &field)?;
    println!("{field}  ->  {stable}");

    let mut rng = sample_rng(7, 0);
    let mut agree = 0;
    for seed in 0..200 {
        let n = rng.random_range(0..=12u32);
        let counts = (0..2 * n + 1).map(|_| rng.random_range(1..=6)).collect();
        let g = GrainField::new(-(n as i64), counts)?;
        if stabilize(n, &g)? == stabilize_bruteforce(n, &g, seed)? {
            agree += 1;
        }
    }
    println!("fast and brute-force stabilization agree on {agree}/200 random fields");
    Ok(())
}
