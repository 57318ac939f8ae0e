//! Height configurations, critical sets and interval decompositions.

use sandpile1d::series::radius;
use sandpile1d::{decency_report, interval_decomposition, CriticalSet, HeightConfig, Tail};

fn main() -> sandpile1d::Result<()> {
    let set: CriticalSet = [-2, -1, 1, 4].into_iter().collect();
    let eta = HeightConfig::from_critical_set(&set);
    println!("eta          = {eta}");
    println!("critical set = {:?}", eta.critical_set()?.iter().collect::<Vec<_>>());

    let parsed: HeightConfig = "-3 3 ones 2 1 2 2 1 1 2".parse()?;
    println!("parsed       = {parsed}, ones on [-3, 3]: {}", parsed.count_ones(-3, 3)?);
    println!("clamped to [-1, 1]: {}", parsed.clamp(1)?);

    let dec = interval_decomposition(&eta, -2, 2)?;
    for j in -2..=2 {
        println!("I_{j:<2} = {:?} (length {})", dec.interval(j), dec.len_of(j));
    }

    let periodic = HeightConfig::new(-200, (0..401).map(|x| if x % 2 == 0 { 1 } else { 2 }).collect(), Tail::AllOnes)?;
    let report = decency_report(&periodic, 100)?;
    println!("period-2 window: a ~ {:.4}, density of ones ~ {:.4}", report.a_estimate, report.rho_estimate);
    println!("series radius: all ones {:.5}, period two {:.5}", radius(&HeightConfig::all_ones(), 200)?, report.radius);
    Ok(())
}
