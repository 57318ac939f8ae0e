//! Toppling maps: adding one grain and relaxing.
//!
//! On the infinite lattice the avalanche caused by adding a grain at `i`
//! has a closed form in terms of the distances `k⁺` and `k⁻` to the
//! nearest ones to the right (inclusive) and to the left (exclusive) of
//! `i`. The finite-volume map clamps to `[-n, n]` with fixed ones outside,
//! so grains that reach the boundary are lost.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{HeightConfig, Scan, Tail};
use crate::error::{Result, SandpileError};

/// A natural number or `∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExtNat {
    Finite(u64),
    Infinite,
}

impl ExtNat {
    pub fn finite(self) -> Option<u64> {
        match self {
            ExtNat::Finite(k) => Some(k),
            ExtNat::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == ExtNat::Infinite
    }
}

impl fmt::Display for ExtNat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtNat::Finite(k) => write!(f, "{k}"),
            ExtNat::Infinite => f.write_str("inf"),
        }
    }
}

fn scan_to_ext(from: i64, scan: Scan, eta: &HeightConfig) -> Result<ExtNat> {
    match scan {
        Scan::Found(x) => Ok(ExtNat::Finite(from.abs_diff(x))),
        Scan::Exhausted => Ok(ExtNat::Infinite),
        Scan::Unresolved(site) => Err(SandpileError::InsufficientWindow { site, lo: eta.lo(), hi: eta.hi() }),
    }
}

/// `k⁺(i, η) = inf{j ≥ 0 : η(i + j) = 1}`.
pub fn k_plus(i: i64, eta: &HeightConfig) -> Result<ExtNat> {
    scan_to_ext(i, eta.scan_right(i), eta)
}

/// `k⁻(i, η) = inf{j > 0 : η(i − j) = 1}`.
pub fn k_minus(i: i64, eta: &HeightConfig) -> Result<ExtNat> {
    scan_to_ext(i, eta.scan_left(i - 1), eta)
}

/// Which of the five closed-form cases an addition falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToppleCase {
    /// `η(i) = 1`: the site simply becomes critical.
    Birth,
    /// Both neighbouring ones exist: they become twos and a hole opens.
    Interior,
    /// No one to the left: one grain is lost to the left.
    LeftEscape,
    /// No one to the right: one grain is lost to the right.
    RightEscape,
    /// `η ≡ 2`: nothing changes.
    AllTwos,
}

/// In-place record of one application of `T_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Toppling {
    pub case: ToppleCase,
    pub k_plus: ExtNat,
    pub k_minus: ExtNat,
    /// `i^η = i + k⁺ − k⁻`, where the new one appears (interior case only).
    pub hole: Option<i64>,
    /// Sites whose height changed, with their new heights.
    pub changes: Vec<(i64, u8)>,
}

/// Result of [`topple_add`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopplingOutcome {
    pub config: HeightConfig,
    pub case: ToppleCase,
    pub k_plus: ExtNat,
    pub k_minus: ExtNat,
    pub hole: Option<i64>,
}

/// Applies `T_i` to `eta` in place. All-ones tails grow the window as needed.
pub fn apply_topple(eta: &mut HeightConfig, i: i64) -> Result<Toppling> {
    let kp = k_plus(i, eta)?;
    let km = k_minus(i, eta)?;
    let mut changes = Vec::with_capacity(3);
    let (case, hole) = match (kp, km) {
        (ExtNat::Finite(0), _) => {
            changes.push((i, 2));
            (ToppleCase::Birth, None)
        }
        (ExtNat::Finite(p), ExtNat::Finite(m)) => {
            let hole = i + p as i64 - m as i64;
            changes.extend([(i - m as i64, 2), (hole, 1), (i + p as i64, 2)]);
            (ToppleCase::Interior, Some(hole))
        }
        (ExtNat::Infinite, ExtNat::Finite(m)) => {
            changes.push((i - m as i64, 2));
            (ToppleCase::RightEscape, None)
        }
        (ExtNat::Finite(p), ExtNat::Infinite) => {
            changes.push((i + p as i64, 2));
            (ToppleCase::LeftEscape, None)
        }
        (ExtNat::Infinite, ExtNat::Infinite) => (ToppleCase::AllTwos, None),
    };
    for &(x, h) in &changes {
        eta.set(x, h)?;
    }
    Ok(Toppling { case, k_plus: kp, k_minus: km, hole, changes })
}

/// `T_i η`: add one grain at `i` and relax on the infinite lattice.
pub fn topple_add(i: i64, eta: &HeightConfig) -> Result<TopplingOutcome> {
    let mut config = eta.clone();
    let t = apply_topple(&mut config, i)?;
    Ok(TopplingOutcome { config, case: t.case, k_plus: t.k_plus, k_minus: t.k_minus, hole: t.hole })
}

/// A lattice site or the point at infinity, where `T_∞` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteOrInfinity {
    Site(i64),
    Infinity,
}

/// Site whose toppling in `ξ` opens a hole at the same place as toppling
/// `η` at `i`; `Infinity` when `ξ` already has a one there.
pub fn phi(i: i64, eta: &HeightConfig, xi: &HeightConfig) -> Result<SiteOrInfinity> {
    if let Some(site) = xi.first_excess_over(eta) {
        return Err(SandpileError::NotOrdered { site });
    }
    if eta.get(i)? != 2 {
        return Err(SandpileError::InvalidSite { site: i, reason: "upper configuration is not critical there".into() });
    }
    phi_unchecked(i, eta, xi)
}

/// [`phi`] without the order and criticality checks.
pub(crate) fn phi_unchecked(i: i64, eta: &HeightConfig, xi: &HeightConfig) -> Result<SiteOrInfinity> {
    let (p, m) = match (k_plus(i, eta)?, k_minus(i, eta)?) {
        (ExtNat::Finite(p), ExtNat::Finite(m)) => (p as i64, m as i64),
        _ => {
            return Err(SandpileError::InvalidSite { site: i, reason: "toppling opens no hole".into() });
        }
    };
    let hole = i + p - m;
    if xi.get(hole)? == 1 {
        return Ok(SiteOrInfinity::Infinity);
    }
    match (k_plus(hole, xi)?, k_minus(hole, xi)?) {
        (ExtNat::Finite(p2), ExtNat::Finite(m2)) => Ok(SiteOrInfinity::Site(hole + p2 as i64 - m2 as i64)),
        _ => Err(SandpileError::NotOrdered { site: hole }),
    }
}

fn check_site(n: u32, i: i64) -> Result<()> {
    if i.unsigned_abs() > n as u64 {
        return Err(SandpileError::InvalidSite { site: i, reason: format!("outside the volume [-{n}, {n}]") });
    }
    Ok(())
}

/// `T_{n,i} η = [T_i η^n]^n`.
pub fn topple_add_finite(n: u32, i: i64, eta: &HeightConfig) -> Result<HeightConfig> {
    check_site(n, i)?;
    let mut clamped = eta.clamp(n)?;
    apply_topple(&mut clamped, i)?;
    clamped.clamp(n)
}

/// Stable configuration of the volume `[-n, n]`, stored as its set of ones.
///
/// Adding a grain costs `O(log n)`: only the nearest ones on each side and
/// the new hole are touched.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiniteVolumePile {
    n: i64,
    ones: BTreeSet<i64>,
}

impl FiniteVolumePile {
    pub fn all_ones(n: u32) -> Self {
        let n = n as i64;
        Self { n, ones: (-n..=n).collect() }
    }

    pub fn from_config(n: u32, eta: &HeightConfig) -> Result<Self> {
        let n = n as i64;
        let mut ones = BTreeSet::new();
        for x in -n..=n {
            if eta.get(x)? == 1 {
                ones.insert(x);
            }
        }
        Ok(Self { n, ones })
    }

    pub fn n(&self) -> u32 {
        self.n as u32
    }

    pub fn height(&self, x: i64) -> u8 {
        if self.ones.contains(&x) || x.abs() > self.n {
            1
        } else {
            2
        }
    }

    /// Number of sites of height 1 inside the volume.
    pub fn ones(&self) -> usize {
        self.ones.len()
    }

    pub fn is_recurrent(&self) -> bool {
        self.ones.len() <= 1
    }

    /// `T_{n,i}` in place.
    pub fn add(&mut self, i: i64) {
        debug_assert!(i.abs() <= self.n);
        if self.ones.remove(&i) {
            return;
        }
        let left = self.ones.range(..i).next_back().copied().unwrap_or(-self.n - 1);
        let right = self.ones.range(i + 1..).next().copied().unwrap_or(self.n + 1);
        self.ones.remove(&left);
        self.ones.remove(&right);
        self.ones.insert(left + right - i);
    }

    /// [`add`](Self::add), returning the sites that changed with their new heights.
    pub fn add_tracked(&mut self, i: i64) -> Vec<(i64, u8)> {
        if self.ones.remove(&i) {
            return vec![(i, 2)];
        }
        let left = self.ones.range(..i).next_back().copied().unwrap_or(-self.n - 1);
        let right = self.ones.range(i + 1..).next().copied().unwrap_or(self.n + 1);
        let mut changes = Vec::with_capacity(3);
        if self.ones.remove(&left) {
            changes.push((left, 2));
        }
        changes.push((left + right - i, 1));
        if self.ones.remove(&right) {
            changes.push((right, 2));
        }
        self.ones.insert(left + right - i);
        changes
    }

    pub fn to_config(&self) -> HeightConfig {
        let heights = (-self.n..=self.n).map(|x| self.height(x)).collect();
        HeightConfig::new(-self.n, heights, Tail::AllOnes).expect("heights are 1 or 2")
    }
}

/// Nonnegative grain counts on a finite window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrainField {
    lo: i64,
    counts: Vec<u64>,
}

impl GrainField {
    pub fn new(lo: i64, counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(SandpileError::InvalidGrainField("empty window".into()));
        }
        Ok(Self { lo, counts })
    }

    pub fn constant(n: u32, count: u64) -> Self {
        Self { lo: -(n as i64), counts: vec![count; 2 * n as usize + 1] }
    }

    /// `η + N` for a configuration `η` and extra counts on `[-n, n]`.
    pub fn from_config_plus(n: u32, eta: &HeightConfig, extra: &[u64]) -> Result<Self> {
        if extra.len() != 2 * n as usize + 1 {
            return Err(SandpileError::InvalidGrainField(format!("expected {} extra counts", 2 * n + 1)));
        }
        let lo = -(n as i64);
        let counts = extra
            .iter()
            .enumerate()
            .map(|(k, &c)| Ok(eta.get(lo + k as i64)? as u64 + c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { lo, counts })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.counts.len() as i64 - 1
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, x: i64) -> Option<u64> {
        (x >= self.lo && x <= self.hi()).then(|| self.counts[(x - self.lo) as usize])
    }

    /// Total mass on `[a, b]`.
    pub fn mass(&self, a: i64, b: i64) -> u64 {
        (a..=b).filter_map(|x| self.get(x)).sum()
    }

    fn volume_counts(&self, n: u32) -> Result<Vec<u64>> {
        let n = n as i64;
        (-n..=n)
            .map(|x| match self.get(x) {
                None => Err(SandpileError::InvalidGrainField(format!("site {x} of the volume is not covered"))),
                Some(0) => Err(SandpileError::InvalidGrainField(format!("site {x} carries no grain"))),
                Some(c) => Ok(c),
            })
            .collect()
    }
}

impl fmt::Display for GrainField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.lo, self.hi())?;
        for c in &self.counts {
            write!(f, " {c}")?;
        }
        Ok(())
    }
}

impl FromStr for GrainField {
    type Err = SandpileError;

    fn from_str(s: &str) -> Result<Self> {
        let nums: Vec<i64> = s
            .split_whitespace()
            .map(|t| t.parse::<i64>().map_err(|e| SandpileError::Parse(format!("`{t}`: {e}"))))
            .collect::<Result<_>>()?;
        if nums.len() < 3 {
            return Err(SandpileError::Parse("grain field needs `lo hi c(lo) … c(hi)`".into()));
        }
        let (lo, hi) = (nums[0], nums[1]);
        if hi < lo || nums.len() as i64 - 2 != hi - lo + 1 {
            return Err(SandpileError::Parse(format!("window [{lo}, {hi}] does not match {} counts", nums.len() - 2)));
        }
        let counts = nums[2..]
            .iter()
            .map(|&c| u64::try_from(c).map_err(|_| SandpileError::InvalidGrainField(format!("negative count {c}"))))
            .collect::<Result<Vec<_>>>()?;
        GrainField::new(lo, counts)
    }
}

/// `θ_n(Ξ)`: add `Ξ(i) − 1` grains at every `i ∈ [-n, n]` to the all-ones
/// configuration and relax with sand lost at the boundary.
pub fn stabilize(n: u32, field: &GrainField) -> Result<HeightConfig> {
    Ok(stabilize_pile(n, field)?.to_config())
}

/// [`stabilize`], returning the finite-volume pile itself.
pub fn stabilize_pile(n: u32, field: &GrainField) -> Result<FiniteVolumePile> {
    let counts = field.volume_counts(n)?;
    let mut pile = FiniteVolumePile::all_ones(n);
    for (k, &c) in counts.iter().enumerate() {
        let i = k as i64 - n as i64;
        for _ in 1..c {
            pile.add(i);
        }
    }
    Ok(pile)
}

/// Literal grain dynamics: while some site holds three or more grains,
/// topple a uniformly chosen such site, sending one grain to each
/// neighbour; grains leaving `[-n, n]` vanish.
pub fn stabilize_bruteforce(n: u32, field: &GrainField, seed: u64) -> Result<HeightConfig> {
    let mut grains = field.volume_counts(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grains.len();
    let mut queued = vec![false; len];
    let mut unstable: Vec<usize> = Vec::new();
    for (k, &g) in grains.iter().enumerate() {
        if g > 2 {
            queued[k] = true;
            unstable.push(k);
        }
    }
    while !unstable.is_empty() {
        let pick = rng.random_range(0..unstable.len());
        let k = unstable[pick];
        grains[k] -= 2;
        if grains[k] <= 2 {
            unstable.swap_remove(pick);
            queued[k] = false;
        }
        for nb in [k.wrapping_sub(1), k + 1] {
            if nb < len {
                grains[nb] += 1;
                if grains[nb] > 2 && !queued[nb] {
                    queued[nb] = true;
                    unstable.push(nb);
                }
            }
        }
    }
    let heights = grains.iter().map(|&g| g as u8).collect();
    HeightConfig::new(-(n as i64), heights, Tail::AllOnes)
}
