use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{exp_time, monte_carlo, sample_rng, Delta, EstimatorParams, EstimatorResult, Event, EventKind, Trajectory};
use crate::config::HeightConfig;
use crate::error::{Result, SandpileError};
use crate::toppling::{stabilize_pile, FiniteVolumePile, GrainField};

fn check_volume(n: u32, eta0: &HeightConfig) -> Result<()> {
    let set = eta0.critical_set()?;
    if let Some(&x) = set.iter().find(|x| x.unsigned_abs() > n as u64) {
        return Err(SandpileError::InvalidSite { site: x, reason: format!("critical outside [-{n}, {n}]") });
    }
    Ok(())
}

/// Finite-volume process on `[-n, n]`: grains arrive at each site as
/// independent rate-one Poisson processes and the pile relaxes with sand
/// lost at the boundary, so the state at time `t` is `θ_n(N_t + η_0)`.
pub fn simulate_fvsp_poisson(n: u32, eta0: &HeightConfig, horizon: f64, seed: u64) -> Result<Trajectory> {
    check_volume(n, eta0)?;
    let mut pile = FiniteVolumePile::from_config(n, eta0)?;
    let mut rng = sample_rng(seed, 0);
    let width = 2 * n as i64 + 1;
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += exp_time(&mut rng, width as f64);
        if t > horizon {
            break;
        }
        let i = rng.random_range(0..width) - n as i64;
        let kind = if pile.height(i) == 1 { EventKind::Birth } else { EventKind::Avalanche };
        let changes = pile.add_tracked(i);
        events.push(Event { t, site: i, kind, delta: Delta::Single(changes) });
    }
    Ok(Trajectory { initial: eta0.clone(), initial_lower: None, events, horizon })
}

/// One sample of `θ_n(N_t + η_0)` with independent `Poisson(t)` grain counts.
pub fn fvsp_state<R: Rng + ?Sized>(n: u32, eta0: &HeightConfig, t: f64, rng: &mut R) -> Result<FiniteVolumePile> {
    let width = 2 * n as usize + 1;
    let extra: Vec<u64> = if t > 0.0 {
        let poisson = Poisson::new(t).map_err(|e| SandpileError::Numerical(e.to_string()))?;
        (0..width).map(|_| poisson.sample(rng) as u64).collect()
    } else {
        vec![0; width]
    };
    stabilize_pile(n, &GrainField::from_config_plus(n, eta0, &extra)?)
}

/// Discrete-time finite-volume chain: each step adds a grain at a
/// uniform site of `[-n, n]` and relaxes.
pub fn discrete_time_fvsp(n: u32, steps: u64, eta0: &HeightConfig, seed: u64) -> Result<HeightConfig> {
    let mut pile = FiniteVolumePile::from_config(n, eta0)?;
    let mut rng = sample_rng(seed, 0);
    let n = n as i64;
    for _ in 0..steps {
        pile.add(rng.random_range(-n..=n));
    }
    Ok(pile.to_config())
}

/// Monte Carlo estimate of `P(θ_n(N_t + 1̂)(0) = 1)`.
pub fn estimate_absorption(n: u32, t: f64, samples: usize, seed: u64) -> Result<EstimatorResult> {
    let ones = HeightConfig::all_ones();
    let acc = monte_carlo(samples, seed, |rng| {
        let pile = fvsp_state(n, &ones, t, rng)?;
        Ok(if pile.height(0) == 1 { 1.0 } else { 0.0 })
    })?;
    let params =
        EstimatorParams { observable: "origin_is_one".into(), eta: Some("all_ones".into()), t, n: Some(n), m: None };
    Ok(EstimatorResult::new(&acc, seed, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toppling::topple_add_finite;

    #[test]
    fn time_zero_keeps_initial_state() {
        let eta = HeightConfig::from_critical_set(&[-1, 1].into_iter().collect());
        let pile = fvsp_state(2, &eta, 0.0, &mut sample_rng(1, 0)).unwrap();
        assert_eq!(pile.to_config(), eta);
        let traj = simulate_fvsp_poisson(2, &eta, 0.0, 1).unwrap();
        assert!(traj.events.is_empty());
    }

    #[test]
    fn trajectory_replays_to_clamped_maps() {
        let eta = HeightConfig::all_ones();
        let traj = simulate_fvsp_poisson(3, &eta, 2.0, 9).unwrap();
        let mut expect = eta.clamp(3).unwrap();
        for ev in &traj.events {
            expect = topple_add_finite(3, ev.site, &expect).unwrap();
        }
        assert_eq!(traj.final_state().unwrap().0, expect);
    }

    #[test]
    fn rejects_criticality_outside_volume() {
        let eta = HeightConfig::from_critical_set(&[5].into_iter().collect());
        assert!(simulate_fvsp_poisson(2, &eta, 1.0, 0).is_err());
    }

    #[test]
    fn discrete_zero_steps_clamps() {
        let eta = HeightConfig::from_critical_set(&[0, 4].into_iter().collect());
        let out = discrete_time_fvsp(1, 0, &eta, 3).unwrap();
        assert_eq!(out, HeightConfig::from_critical_set(&[0].into_iter().collect()));
    }

    #[test]
    fn absorption_at_time_zero() {
        let res = estimate_absorption(3, 0.0, 50, 2).unwrap();
        assert_eq!(res.mean, 1.0);
        assert_eq!(res.stderr, 0.0);
    }
}
