use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{exp_time, sample_rng, Delta, Event, EventKind, Live, Trajectory};
use crate::config::{CriticalSet, HeightConfig};
use crate::error::Result;
use crate::toppling::{ToppleCase, Toppling};

fn event(t: f64, site: i64, topple: Toppling) -> Event {
    let kind = if topple.case == ToppleCase::Birth { EventKind::Birth } else { EventKind::Avalanche };
    Event { t, site, kind, delta: Delta::Single(topple.changes) }
}

/// The avalanche chain on finite critical sets: every critical site
/// carries a rate-one clock, and a ring adds a grain there.
#[derive(Debug, Clone)]
pub struct AvalancheChain {
    live: Live,
}

impl AvalancheChain {
    pub fn new(a0: &CriticalSet) -> Self {
        let eta = HeightConfig::from_critical_set(a0);
        Self { live: Live::new(&eta).expect("all-ones tail") }
    }

    pub fn size(&self) -> usize {
        self.live.critical.len()
    }

    pub fn config(&self) -> &HeightConfig {
        &self.live.eta
    }

    pub fn critical_set(&self) -> CriticalSet {
        self.live.eta.critical_sites_in_window()
    }

    pub fn is_critical(&self, x: i64) -> bool {
        self.live.height(x) == 2
    }

    /// One jump of the embedded chain: a uniformly chosen critical site
    /// topples. `None` when there is no critical site.
    pub fn jump<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<(i64, Toppling)>> {
        if self.size() == 0 {
            return Ok(None);
        }
        let i = self.live.critical.get(rng.random_range(0..self.size()));
        Ok(Some((i, self.live.topple(i)?)))
    }
}

/// Avalanche chain from `a0` up to time `horizon`.
pub fn simulate_avalanche_chain(a0: &CriticalSet, horizon: f64, seed: u64) -> Result<Trajectory> {
    let mut chain = AvalancheChain::new(a0);
    let mut rng = sample_rng(seed, 0);
    let initial = chain.config().clone();
    let mut events = Vec::new();
    let mut t = 0.0;
    while chain.size() > 0 {
        t += exp_time(&mut rng, chain.size() as f64);
        if t > horizon {
            break;
        }
        if let Some((i, topple)) = chain.jump(&mut rng)? {
            events.push(event(t, i, topple));
        }
    }
    Ok(Trajectory { initial, initial_lower: None, events, horizon })
}

/// The chain with avalanches at every critical site and births at the
/// ones of `[-n, n]`.
#[derive(Debug, Clone)]
pub struct BirthChain {
    live: Live,
    n: i64,
}

impl BirthChain {
    /// Fails with `NotFinite` unless `eta0` has an all-ones tail.
    pub fn new(n: u32, eta0: &HeightConfig) -> Result<Self> {
        Ok(Self { live: Live::new(eta0)?, n: n as i64 })
    }

    pub fn config(&self) -> &HeightConfig {
        &self.live.eta
    }

    fn total_rate(&self) -> usize {
        self.live.critical.len() + (2 * self.n + 1) as usize
    }

    /// Next clock ring; `None` when a birth clock rings at a critical site.
    fn ring<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<(i64, Toppling)>> {
        let a = self.live.critical.len();
        let u = rng.random_range(0..self.total_rate());
        if u < a {
            let i = self.live.critical.get(u);
            return Ok(Some((i, self.live.topple(i)?)));
        }
        let i = (u - a) as i64 - self.n;
        if self.live.height(i) == 1 {
            Ok(Some((i, self.live.topple(i)?)))
        } else {
            Ok(None)
        }
    }

    /// Runs the chain for `duration`, appending events to `record` when given.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        duration: f64,
        rng: &mut R,
        mut record: Option<&mut Vec<Event>>,
    ) -> Result<()> {
        let mut t = 0.0;
        loop {
            t += exp_time(rng, self.total_rate() as f64);
            if t > duration {
                return Ok(());
            }
            if let Some((i, topple)) = self.ring(rng)? {
                if let Some(rec) = record.as_deref_mut() {
                    rec.push(event(t, i, topple));
                }
            }
        }
    }
}

/// The chain generated by avalanches everywhere and births in `[-n, n]`.
pub fn simulate_ln(n: u32, eta0: &HeightConfig, horizon: f64, seed: u64) -> Result<Trajectory> {
    let mut chain = BirthChain::new(n, eta0)?;
    let mut rng = sample_rng(seed, 0);
    let mut events = Vec::new();
    chain.run(horizon, &mut rng, Some(&mut events))?;
    Ok(Trajectory { initial: eta0.clone(), initial_lower: None, events, horizon })
}

/// An interval with at most one interior site removed (or the empty set).
pub fn is_interval_minus_point(set: &CriticalSet) -> bool {
    set.gaps().len() <= 1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoleLawRow {
    pub k: usize,
    pub empirical: f64,
    pub stderr: f64,
    /// `1 / (|A_0| + k - 1)`
    pub theory: f64,
    /// Exact probability from [`hole_law_exact`].
    pub exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoleLaw {
    pub n: u32,
    pub samples: usize,
    pub rows: Vec<HoleLawRow>,
    /// Sampled states that were not an interval minus at most one point.
    pub structural_violations: usize,
}

/// Empirical probability that the origin is not critical after the
/// `k`-th jump of the avalanche chain started from `[-n, n]`.
pub fn hole_law(n: u32, k_max: usize, samples: usize, seed: u64) -> Result<HoleLaw> {
    let a0 = CriticalSet::interval(-(n as i64), n as i64);
    let runs = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = sample_rng(seed, s);
            let mut chain = AvalancheChain::new(&a0);
            let mut holes = Vec::with_capacity(k_max);
            let mut bad = 0usize;
            for _ in 0..k_max {
                chain.jump(&mut rng)?;
                holes.push(!chain.is_critical(0));
                if !is_interval_minus_point(&chain.critical_set()) {
                    bad += 1;
                }
            }
            Ok((holes, bad))
        })
        .collect::<Result<Vec<_>>>()?;
    let nf = samples as f64;
    let exact = hole_law_exact(n, k_max);
    let rows = (0..k_max)
        .map(|k| {
            let hits = runs.iter().filter(|(h, _)| h[k]).count() as f64;
            let p = hits / nf;
            let var = if samples > 1 { p * (1.0 - p) * nf / (nf - 1.0) } else { 0.0 };
            HoleLawRow {
                k: k + 1,
                empirical: p,
                stderr: (var / nf).sqrt(),
                theory: 1.0 / (a0.len() + k) as f64,
                exact: exact[k],
            }
        })
        .collect();
    let structural_violations = runs.iter().map(|(_, b)| b).sum();
    Ok(HoleLaw { n, samples, rows, structural_violations })
}

/// Exact probability that the origin is not critical after jumps
/// `1..=k_max` of the avalanche chain started from `[-n, n]`.
///
/// Every reachable set is an interval `[l, r]` minus at most one interior
/// hole, so the law is propagated over `(l, r, hole)` triples.
pub fn hole_law_exact(n: u32, k_max: usize) -> Vec<f64> {
    type State = (i64, i64, Option<i64>);
    let n = n as i64;
    let mut law: BTreeMap<State, f64> = BTreeMap::from([((-n, n, None), 1.0)]);
    let mut out = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        let mut next: BTreeMap<State, f64> = BTreeMap::new();
        for (&(l, r, hole), &p) in &law {
            let size = (r - l + 1) as f64 - if hole.is_some() { 1.0 } else { 0.0 };
            let w = p / size;
            for i in l..=r {
                let to = match hole {
                    Some(h) if i == h => continue,
                    None => (l - 1, r + 1, l + r - i),
                    Some(h) if i > h => (l, r + 1, r + 1 + h - i),
                    Some(h) => (l - 1, r, l - 1 + h - i),
                };
                *next.entry((to.0, to.1, Some(to.2))).or_insert(0.0) += w;
            }
        }
        law = next;
        out.push(law.iter().filter(|((l, r, h), _)| *h == Some(0) || 0 < *l || 0 > *r).map(|(_, p)| p).sum());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_hole_law_small_cases() {
        let law = hole_law_exact(2, 3);
        assert!((law[0] - 1.0 / 5.0).abs() < 1e-15);
        assert!((law[1] - 2.0 / 15.0).abs() < 1e-15);
        assert!((law[2] - 13.0 / 105.0).abs() < 1e-15);
        assert!((hole_law_exact(1, 2)[1] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn first_jump_from_singleton() {
        let mut chain = AvalancheChain::new(&[0].into_iter().collect());
        let mut rng = sample_rng(3, 0);
        chain.jump(&mut rng).unwrap();
        assert_eq!(chain.critical_set(), [-1, 1].into_iter().collect());
    }

    #[test]
    fn size_grows_by_one_per_jump() {
        let traj = simulate_avalanche_chain(&CriticalSet::interval(-2, 2), 1.5, 11).unwrap();
        assert!(traj.times_are_valid());
        let mut chain_state = traj.initial.clone();
        let mut size = 5;
        for ev in &traj.events {
            if let Delta::Single(ch) = &ev.delta {
                for &(x, h) in ch {
                    chain_state.set(x, h).unwrap();
                }
            }
            size += 1;
            assert_eq!(chain_state.critical_set().unwrap().len(), size);
        }
    }

    #[test]
    fn empty_set_never_moves() {
        let traj = simulate_avalanche_chain(&CriticalSet::new(), 5.0, 1).unwrap();
        assert!(traj.events.is_empty());
    }

    #[test]
    fn birth_chain_first_event_from_all_ones() {
        let traj = simulate_ln(0, &HeightConfig::all_ones(), 10.0, 5).unwrap();
        let first = &traj.events[0];
        assert_eq!(first.kind, EventKind::Birth);
        assert_eq!(first.delta, Delta::Single(vec![(0, 2)]));
    }

    #[test]
    fn birth_chain_is_seed_deterministic() {
        let eta = HeightConfig::from_critical_set(&[0, 2].into_iter().collect());
        let a = simulate_ln(2, &eta, 1.0, 77).unwrap();
        let b = simulate_ln(2, &eta, 1.0, 77).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
    }

    #[test]
    fn interval_minus_point_shapes() {
        assert!(is_interval_minus_point(&[1, 2, 4].into_iter().collect()));
        assert!(!is_interval_minus_point(&[1, 3, 5].into_iter().collect()));
        assert!(is_interval_minus_point(&CriticalSet::new()));
    }
}
