//! Adding a grain: the toppling map, its cases and the coupling map.

use sandpile1d::{phi, topple_add, topple_add_finite, CriticalSet, HeightConfig};

fn show(label: &str, eta: &HeightConfig, i: i64) -> sandpile1d::Result<()> {
    let out = topple_add(i, eta)?;
    println!(
        "{label:<12} add at {i}: {:?}, k+ = {:?}, k- = {:?}, hole = {:?}\n             {} -> {}",
        out.case, out.k_plus, out.k_minus, out.hole, eta, out.config
    );
    Ok(())
}

fn main() -> sandpile1d::Result<()> {
    let eta: HeightConfig = "-2 2 ones 2 2 2 1 2".parse()?;
    show("birth", &eta, 1)?;
    show("interior", &eta, 0)?;
    show("all twos", &HeightConfig::all_twos(), 0)?;

    let finite = topple_add_finite(2, 0, &"-2 2 ones 2 2 2 2 2".parse()?)?;
    println!("finite volume [-2, 2], all twos, add at 0 -> {finite}");

    let upper = HeightConfig::from_critical_set(&[-1, 0, 1, 2].into_iter().collect::<CriticalSet>());
    let lower = HeightConfig::from_critical_set(&[0, 1].into_iter().collect::<CriticalSet>());
    for i in [-1, 0, 1, 2] {
        println!("phi({i}) = {:?}", phi(i, &upper, &lower)?);
    }
    Ok(())
}
