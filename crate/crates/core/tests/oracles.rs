//! Independent reference implementations, checked against the library.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use rand::Rng;
use sandpile1d::exact::{build_generator, recurrent_set, transient_distribution, StateSpace};
use sandpile1d::series::{apply_l, iterate_ln, LocalFunction, SeriesOptions};
use sandpile1d::sim::{hole_law, hole_law_exact, sample_rng};
use sandpile1d::{topple_add, topple_add_finite, HeightConfig, Tail};

/// Adds one grain at `i` and relaxes grain by grain: a site with three or
/// more grains sends one to each neighbour. Sites outside `[lo, hi]` drop
/// their grains when `lossy`, and otherwise the window must be wide enough.
fn relax(heights: &mut [u64], lo: i64, i: i64, lossy: bool) {
    let len = heights.len() as i64;
    heights[(i - lo) as usize] += 1;
    let mut stack = vec![i - lo];
    while let Some(k) = stack.pop() {
        while heights[k as usize] >= 3 {
            heights[k as usize] -= 2;
            for nb in [k - 1, k + 1] {
                if nb < 0 || nb >= len {
                    assert!(lossy, "avalanche reached the edge of the window");
                    continue;
                }
                heights[nb as usize] += 1;
                if heights[nb as usize] >= 3 {
                    stack.push(nb);
                }
            }
        }
    }
}

fn heights_of(eta: &HeightConfig, lo: i64, hi: i64) -> Vec<u64> {
    (lo..=hi).map(|x| eta.get(x).unwrap() as u64).collect()
}

#[test]
fn topple_add_matches_grain_relaxation() {
    let mut rng = sample_rng(1, 0);
    for _ in 0..3000 {
        let width = rng.random_range(1..=30usize);
        let lo = -(rng.random_range(0..width as i64));
        let heights: Vec<u8> = (0..width).map(|_| rng.random_range(1..=2)).collect();
        let eta = HeightConfig::new(lo, heights, Tail::AllOnes).unwrap();
        let i = lo + rng.random_range(-3..width as i64 + 3);
        let (a, b) = (lo - 5, lo + width as i64 + 5);
        let mut grains = heights_of(&eta, a, b);
        relax(&mut grains, a, i, false);
        assert_eq!(heights_of(&topple_add(i, &eta).unwrap().config, a, b), grains, "eta {eta}, add at {i}");
    }
}

#[test]
fn finite_topple_matches_lossy_relaxation() {
    let mut rng = sample_rng(2, 0);
    for _ in 0..3000 {
        let n = rng.random_range(0..=12u32);
        let lo = -(n as i64);
        let heights: Vec<u8> = (0..2 * n + 1).map(|_| rng.random_range(1..=2)).collect();
        let eta = HeightConfig::new(lo, heights, Tail::AllOnes).unwrap();
        let i = rng.random_range(lo..=n as i64);
        let mut grains = heights_of(&eta, lo, n as i64);
        relax(&mut grains, lo, i, true);
        assert_eq!(heights_of(&topple_add_finite(n, i, &eta).unwrap(), lo, n as i64), grains);
    }
}

fn topple_set(set: &BTreeSet<i64>, i: i64) -> BTreeSet<i64> {
    let mut eta: Vec<u64> = (-40..=40).map(|x| if set.contains(&x) { 2 } else { 1 }).collect();
    relax(&mut eta, -40, i, false);
    (-40..=40).filter(|&x| eta[(x + 40) as usize] == 2).collect()
}

#[test]
fn exact_hole_law_matches_set_enumeration() {
    for n in 1..=2i64 {
        let mut law: HashMap<BTreeSet<i64>, f64> = HashMap::from([((-n..=n).collect(), 1.0)]);
        let exact = hole_law_exact(n as u32, 4);
        for value in exact {
            let mut next = HashMap::new();
            for (set, p) in &law {
                for &i in set {
                    *next.entry(topple_set(set, i)).or_insert(0.0) += p / set.len() as f64;
                }
            }
            law = next;
            let direct: f64 = law.iter().filter(|(s, _)| !s.contains(&0)).map(|(_, p)| p).sum();
            assert!((direct - value).abs() < 1e-12, "n = {n}: {direct} vs {value}");
        }
    }
}

#[test]
fn simulated_hole_law_matches_exact_law() {
    for n in [1u32, 2, 5] {
        let law = hole_law(n, 20, 40_000, 77 + n as u64).unwrap();
        for row in &law.rows {
            let z = (row.empirical - row.exact) / row.stderr;
            assert!(z.abs() < 4.5, "n = {n}, k = {}: z = {z}", row.k);
        }
    }
}

#[test]
fn recurrent_sets_have_at_most_one_one() {
    for n in 0..=6u32 {
        let space = StateSpace::new(n).unwrap();
        let direct: Vec<usize> =
            (0..space.len()).filter(|&s| space.heights(s).iter().filter(|&&h| h == 1).count() <= 1).collect();
        assert_eq!(recurrent_set(n).unwrap(), direct);
        assert_eq!(direct.len(), 2 * n as usize + 2);
    }
}

#[test]
fn transient_law_matches_taylor_matrix_exponential() {
    for n in 0..=3u32 {
        let q = build_generator(n).unwrap().to_dense().unwrap();
        for t in [0.1, 0.7, 2.5] {
            // scaling and squaring with a long Taylor series
            let squarings = 8;
            let a = &q * (t / f64::from(1 << squarings));
            let mut term = DMatrix::<f64>::identity(q.nrows(), q.ncols());
            let mut exp = term.clone();
            for k in 1..30 {
                term = &term * &a / k as f64;
                exp += &term;
            }
            for _ in 0..squarings {
                exp = &exp * &exp;
            }
            for s0 in [0, q.nrows() - 1] {
                let p = transient_distribution(n, s0, t).unwrap();
                for s in 0..q.nrows() {
                    assert!((p.weights[s] - exp[(s0, s)]).abs() < 1e-10, "n = {n}, t = {t}");
                }
            }
        }
    }
}

/// `L^k f(η)` by summing over every site of a wide window.
fn naive_iterate(f: &LocalFunction, eta: &HeightConfig, k: usize, reach: i64) -> f64 {
    if k == 0 {
        return f.eval(eta).unwrap();
    }
    let base = naive_iterate(f, eta, k - 1, reach);
    (-reach..=reach).map(|i| naive_iterate(f, &topple_add(i, eta).unwrap().config, k - 1, reach) - base).sum()
}

#[test]
fn generator_iterates_match_naive_sums() {
    let configs: Vec<HeightConfig> = ["0 0 ones 1", "-1 1 ones 2 1 2", "-2 1 ones 2 2 1 2", "0 2 ones 2 1 1"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let opts = SeriesOptions::default();
    for f in [LocalFunction::occ0(), LocalFunction::pair01(), LocalFunction::builtin("interval-len 0").unwrap()] {
        for eta in &configs {
            assert_eq!(apply_l(&f, eta).unwrap().value, naive_iterate(&f, eta, 1, 20));
            for k in 1..=3 {
                assert_eq!(
                    iterate_ln(&f, eta, k, &opts).unwrap(),
                    naive_iterate(&f, eta, k, 12),
                    "{} at {eta}, k = {k}",
                    f.name()
                );
            }
        }
    }
}

#[test]
fn occupation_iterates_vanish_on_all_ones() {
    let f = LocalFunction::occ0();
    let ones = HeightConfig::all_ones();
    assert_eq!(naive_iterate(&f, &ones, 1, 10), 1.0);
    for k in 2..=3 {
        assert_eq!(naive_iterate(&f, &ones, k, 10), 0.0);
        assert_eq!(iterate_ln(&f, &ones, k, &SeriesOptions::default()).unwrap(), 0.0);
    }
}
