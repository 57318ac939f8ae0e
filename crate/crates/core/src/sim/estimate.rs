use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_rng, BirthChain, CoupledChain, Coupling};
use crate::config::HeightConfig;
use crate::error::Result;

/// Running mean and variance (Welford), mergeable in any grouping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Accumulator) -> Accumulator {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.count as f64 * other.count as f64) / count as f64;
        Accumulator { count, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance with the `n - 1` denominator.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub observable: String,
    pub eta: Option<String>,
    pub t: f64,
    pub n: Option<u32>,
    pub m: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    pub params: EstimatorParams,
}

impl EstimatorResult {
    pub fn new(acc: &Accumulator, seed: u64, params: EstimatorParams) -> Self {
        Self { mean: acc.mean(), stderr: acc.stderr(), samples: acc.count(), seed, params }
    }
}

/// Runs `sample` once per index on its own stream, in parallel, and
/// returns the outputs in index order.
pub fn sample_all<T, F>(samples: usize, seed: u64, sample: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..samples as u64).into_par_iter().map(|k| sample(&mut sample_rng(seed, k))).collect()
}

/// Mean and spread of `samples` independent draws of `sample`.
pub fn monte_carlo<F>(samples: usize, seed: u64, sample: F) -> Result<Accumulator>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    Ok(sample_all(samples, seed, sample)?.into_iter().collect())
}

/// Parameters of a semigroup estimate: time `t`, birth window `[-n, n]`,
/// initial truncation `[-m, m]` (ones outside).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupParams {
    pub t: f64,
    pub n: u32,
    pub m: u32,
    pub samples: usize,
    pub seed: u64,
}

/// Monte Carlo estimate of `S_n(t) f(η'_m)`, where `η'_m` equals `η` on
/// `[-m, m]` and is one elsewhere.
pub fn estimate_semigroup<F>(f: F, label: &str, eta: &HeightConfig, p: &SemigroupParams) -> Result<EstimatorResult>
where
    F: Fn(&HeightConfig) -> Result<f64> + Sync,
{
    let start = eta.clamp(p.m)?;
    let acc = monte_carlo(p.samples, p.seed, |rng| {
        let mut chain = BirthChain::new(p.n, &start)?;
        chain.run(p.t, rng, None)?;
        f(chain.config())
    })?;
    let params = EstimatorParams {
        observable: label.into(),
        eta: Some(start.trimmed().to_string()),
        t: p.t,
        n: Some(p.n),
        m: Some(p.m),
    };
    Ok(EstimatorResult::new(&acc, p.seed, params))
}

/// Paired estimates from the coupling of the `n + 1` and `n` chains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestedGap {
    pub upper: EstimatorResult,
    pub lower: EstimatorResult,
    /// Estimate of `E f(upper) − E f(lower)` from paired samples.
    pub difference: EstimatorResult,
    pub order_violations: usize,
}

/// Estimates `S_{n+1}(t) f(η'_m)` and `S_n(t) f(η'_m)` on a common
/// probability space.
pub fn estimate_nested_gap<F>(f: F, label: &str, eta: &HeightConfig, p: &SemigroupParams) -> Result<NestedGap>
where
    F: Fn(&HeightConfig) -> Result<f64> + Sync,
{
    let start = eta.clamp(p.m)?;
    let draws = sample_all(p.samples, p.seed, |rng| {
        let mut chain = CoupledChain::new(Coupling::NestedBirth { n: p.n }, &start, &start)?;
        chain.run(p.t, rng, None)?;
        Ok((f(chain.upper())?, f(chain.lower())?, chain.violations()))
    })?;
    let upper: Accumulator = draws.iter().map(|d| d.0).collect();
    let lower: Accumulator = draws.iter().map(|d| d.1).collect();
    let diff: Accumulator = draws.iter().map(|d| d.0 - d.1).collect();
    let params = |n: u32| EstimatorParams {
        observable: label.into(),
        eta: Some(start.trimmed().to_string()),
        t: p.t,
        n: Some(n),
        m: Some(p.m),
    };
    Ok(NestedGap {
        upper: EstimatorResult::new(&upper, p.seed, params(p.n + 1)),
        lower: EstimatorResult::new(&lower, p.seed, params(p.n)),
        difference: EstimatorResult::new(&diff, p.seed, params(p.n)),
        order_violations: draws.iter().map(|d| d.2).sum(),
    })
}
