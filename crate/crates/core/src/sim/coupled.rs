use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{exp_time, sample_rng, Delta, Event, EventKind, Live, Trajectory};
use crate::config::{CriticalSet, HeightConfig};
use crate::error::{Result, SandpileError};
use crate::toppling::{phi_unchecked, SiteOrInfinity};

/// Which pair of dynamics is coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Coupling {
    /// Two avalanche chains.
    Avalanche,
    /// Two chains with births in `[-n, n]`.
    Birth { n: u32 },
    /// Upper chain with births in `[-n-1, n+1]`, lower in `[-n, n]`.
    NestedBirth { n: u32 },
}

impl Coupling {
    /// Half-width of the upper chain's birth window, if any.
    fn upper_window(self) -> Option<i64> {
        match self {
            Coupling::Avalanche => None,
            Coupling::Birth { n } => Some(n as i64),
            Coupling::NestedBirth { n } => Some(n as i64 + 1),
        }
    }

    fn lower_window(self) -> Option<i64> {
        match self {
            Coupling::Avalanche => None,
            Coupling::Birth { n } | Coupling::NestedBirth { n } => Some(n as i64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledState {
    pub upper: HeightConfig,
    pub lower: HeightConfig,
}

/// Two ordered configurations driven by shared avalanche clocks (one per
/// critical site of the upper configuration) and shared birth clocks.
#[derive(Debug, Clone)]
pub struct CoupledChain {
    upper: Live,
    lower: Live,
    coupling: Coupling,
    violations: usize,
}

impl CoupledChain {
    pub fn new(coupling: Coupling, upper: &HeightConfig, lower: &HeightConfig) -> Result<Self> {
        if let Some(site) = lower.first_excess_over(upper) {
            return Err(SandpileError::NotOrdered { site });
        }
        Ok(Self { upper: Live::new(upper)?, lower: Live::new(lower)?, coupling, violations: 0 })
    }

    pub fn upper(&self) -> &HeightConfig {
        &self.upper.eta
    }

    pub fn lower(&self) -> &HeightConfig {
        &self.lower.eta
    }

    pub fn state(&self) -> CoupledState {
        CoupledState { upper: self.upper.eta.clone(), lower: self.lower.eta.clone() }
    }

    /// Order violations seen on changed sites so far.
    pub fn violations(&self) -> usize {
        self.violations
    }

    fn birth_width(&self) -> usize {
        self.coupling.upper_window().map_or(0, |w| (2 * w + 1) as usize)
    }

    fn total_rate(&self) -> usize {
        self.upper.critical.len() + self.birth_width()
    }

    fn ring<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<(i64, EventKind, Delta)>> {
        let a = self.upper.critical.len();
        let u = rng.random_range(0..self.total_rate());
        let (site, kind, upper, lower) = if u < a {
            let i = self.upper.critical.get(u);
            let target = phi_unchecked(i, &self.upper.eta, &self.lower.eta)?;
            let up = self.upper.topple(i)?.changes;
            let low = match target {
                SiteOrInfinity::Site(j) => self.lower.topple(j)?.changes,
                SiteOrInfinity::Infinity => Vec::new(),
            };
            (i, EventKind::Avalanche, up, low)
        } else {
            let w = self.coupling.upper_window().expect("birth clocks need a window");
            let i = (u - a) as i64 - w;
            let inner = self.coupling.lower_window().is_some_and(|n| i.abs() <= n);
            match (self.upper.height(i), self.lower.height(i), inner) {
                (1, 1, true) => (i, EventKind::Birth, self.upper.topple(i)?.changes, self.lower.topple(i)?.changes),
                (2, 1, true) => (i, EventKind::Birth, Vec::new(), self.lower.topple(i)?.changes),
                (1, 1, false) => (i, EventKind::Birth, self.upper.topple(i)?.changes, Vec::new()),
                _ => return Ok(None),
            }
        };
        for &(x, _) in upper.iter().chain(&lower) {
            if self.lower.height(x) > self.upper.height(x) {
                self.violations += 1;
            }
        }
        let kind = if !upper.is_empty() && !lower.is_empty() { EventKind::CoupledPair } else { kind };
        Ok(Some((site, kind, Delta::Pair { upper, lower })))
    }

    pub fn run<R: Rng + ?Sized>(
        &mut self,
        duration: f64,
        rng: &mut R,
        mut record: Option<&mut Vec<Event>>,
    ) -> Result<()> {
        let mut t = 0.0;
        loop {
            let rate = self.total_rate();
            if rate == 0 {
                return Ok(());
            }
            t += exp_time(rng, rate as f64);
            if t > duration {
                return Ok(());
            }
            if let Some((site, kind, delta)) = self.ring(rng)? {
                if let Some(rec) = record.as_deref_mut() {
                    rec.push(Event { t, site, kind, delta });
                }
            }
        }
    }
}

/// Coupled trajectory from the ordered pair `upper ≥ lower`.
pub fn simulate_coupled(
    coupling: Coupling,
    upper: &HeightConfig,
    lower: &HeightConfig,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    let mut chain = CoupledChain::new(coupling, upper, lower)?;
    let mut rng = sample_rng(seed, 0);
    let mut events = Vec::new();
    chain.run(horizon, &mut rng, Some(&mut events))?;
    Ok(Trajectory { initial: upper.clone(), initial_lower: Some(lower.clone()), events, horizon })
}

pub fn simulate_coupled_avalanche(
    upper: &HeightConfig,
    lower: &HeightConfig,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    simulate_coupled(Coupling::Avalanche, upper, lower, horizon, seed)
}

pub fn simulate_coupled_n(
    n: u32,
    upper: &HeightConfig,
    lower: &HeightConfig,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    simulate_coupled(Coupling::Birth { n }, upper, lower, horizon, seed)
}

pub fn simulate_coupled_n1_n(
    n: u32,
    upper: &HeightConfig,
    lower: &HeightConfig,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    simulate_coupled(Coupling::NestedBirth { n }, upper, lower, horizon, seed)
}

/// Random ordered pair on `[-w, w]`: each site is critical in the upper
/// configuration with probability `p`, and each upper critical site stays
/// critical in the lower one with probability `p`.
pub fn random_ordered_pair<R: Rng + ?Sized>(w: u32, p: f64, rng: &mut R) -> (HeightConfig, HeightConfig) {
    let w = w as i64;
    let upper: CriticalSet = (-w..=w).filter(|_| rng.random_bool(p)).collect();
    let lower: CriticalSet = upper.iter().copied().filter(|_| rng.random_bool(p)).collect();
    (HeightConfig::from_critical_set(&upper), HeightConfig::from_critical_set(&lower))
}

/// Replays a coupled trajectory and counts events after which the lower
/// configuration exceeds the upper one somewhere.
pub fn order_violations(traj: &Trajectory) -> Result<usize> {
    let Some(lower0) = &traj.initial_lower else {
        return Err(SandpileError::Parse("trajectory is not coupled".into()));
    };
    let mut upper = traj.initial.clone();
    let mut lower = lower0.clone();
    let mut count = usize::from(!lower.le(&upper));
    for ev in &traj.events {
        let Delta::Pair { upper: du, lower: dl } = &ev.delta else {
            return Err(SandpileError::Parse("uncoupled event in a coupled trajectory".into()));
        };
        for &(x, h) in du {
            upper.set(x, h)?;
        }
        for &(x, h) in dl {
            lower.set(x, h)?;
        }
        if !lower.le(&upper) {
            count += 1;
        }
    }
    Ok(count)
}
