//! The avalanche chain on finite critical sets and the law of the hole it
//! leaves near the origin.

use sandpile1d::sim::{hole_law, simulate_avalanche_chain};
use sandpile1d::CriticalSet;

fn main() -> sandpile1d::Result<()> {
    let a0 = CriticalSet::interval(-2, 2);
    let traj = simulate_avalanche_chain(&a0, 1.0, 42)?;
    println!("{} jumps before t = 1; final state {}", traj.events.len(), traj.final_state()?.0);
    print!("{}", traj.to_jsonl().lines().take(4).collect::<Vec<_>>().join("\n"));
    println!("\n...");

    let law = hole_law(2, 6, 50_000, 1)?;
    println!(" k  empirical  stderr   1/(5+k-1)  exact");
    for row in &law.rows {
        println!("{:2}  {:.5}    {:.5}  {:.5}    {:.5}", row.k, row.empirical, row.stderr, row.theory, row.exact);
    }
    println!("states that were not an interval minus a point: {}", law.structural_violations);
    Ok(())
}
