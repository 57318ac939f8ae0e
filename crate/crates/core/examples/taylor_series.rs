//! The generator on local observables, its iterates and bounds, and the
//! truncated Taylor series of the semigroup.

use sandpile1d::series::{apply_l, bound_ln, iterate_ln, taylor_semigroup, LocalFunction, SeriesOptions};
use sandpile1d::sim::{estimate_semigroup, SemigroupParams};
use sandpile1d::HeightConfig;

fn main() -> sandpile1d::Result<()> {
    let eta: HeightConfig = "-1 1 ones 2 1 2".parse()?;
    let opts = SeriesOptions::default();
    for f in [LocalFunction::occ0(), LocalFunction::pair01(), LocalFunction::builtin("interval-len 0")?] {
        let l = apply_l(&f, &eta)?;
        println!("{}: Lf = {} (summed over sites {:?})", f.name(), l.value, l.sites);
        for k in 0..=4 {
            println!("   L^{k} f = {:>10}   bound {:.3e}", iterate_ln(&f, &eta, k, &opts)?, bound_ln(&f, &eta, k)?);
        }
    }

    let f = LocalFunction::occ0();
    let ones = HeightConfig::all_ones();
    let opts = SeriesOptions { depth_cap: 12, ..opts };
    for t in [0.005, 0.02] {
        let s = taylor_semigroup(&f, &ones, t, 1e-8, &opts)?;
        let p = SemigroupParams { t, n: 10, m: 10, samples: 100_000, seed: 2 };
        let mc = estimate_semigroup(|e: &HeightConfig| f.eval(e), "occ0", &ones, &p)?;
        println!(
            "t = {t}: series {:.6} (K = {}, tail {:.1e}), Monte Carlo {:.6} +/- {:.6}",
            s.value, s.truncation_k, s.tail_bound, mc.mean, mc.stderr
        );
    }
    match taylor_semigroup(&f, &ones, 0.05, 1e-8, &opts) {
        Ok(s) => println!("t = 0.05: {}", s.value),
        Err(e) => println!("t = 0.05: {e}"),
    }
    Ok(())
}
