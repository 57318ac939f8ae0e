//! Height configurations on the integer lattice.
//!
//! A [`HeightConfig`] stores heights in `{1, 2}` densely over a window
//! `[lo, hi]` and describes every site outside the window with a [`Tail`].
//! Configurations with an all-ones tail are exactly the configurations with
//! finitely many critical sites, and they convert to and from a
//! [`CriticalSet`].

use std::collections::BTreeSet;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SandpileError};

/// Height of a critical site.
pub const THRESHOLD: u8 = 2;

/// What a configuration looks like outside its stored window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    AllOnes,
    AllTwos,
    Unspecified,
}

impl Tail {
    fn height(self) -> Option<u8> {
        match self {
            Tail::AllOnes => Some(1),
            Tail::AllTwos => Some(2),
            Tail::Unspecified => None,
        }
    }

    fn token(self) -> &'static str {
        match self {
            Tail::AllOnes => "ones",
            Tail::AllTwos => "twos",
            Tail::Unspecified => "unspec",
        }
    }
}

/// Outcome of scanning for the nearest site of height 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scan {
    Found(i64),
    /// Only twos in that direction, forever.
    Exhausted,
    /// The scan left the window into an unspecified tail at this site.
    Unresolved(i64),
}

/// A configuration `η ∈ {1,2}^Z`, stored on a window plus a tail convention.
///
/// Equality is semantic: two values compare equal when they describe the
/// same configuration, whatever their stored windows.
#[derive(Debug, Clone)]
pub struct HeightConfig {
    lo: i64,
    heights: Vec<u8>,
    tail: Tail,
}

impl HeightConfig {
    pub fn new(lo: i64, heights: Vec<u8>, tail: Tail) -> Result<Self> {
        if heights.is_empty() {
            return Err(SandpileError::Parse("a configuration window needs at least one site".into()));
        }
        if let Some(&bad) = heights.iter().find(|&&h| h != 1 && h != 2) {
            return Err(SandpileError::InvalidHeight(bad as u64));
        }
        Ok(Self { lo, heights, tail })
    }

    pub fn all_ones() -> Self {
        Self { lo: 0, heights: vec![1], tail: Tail::AllOnes }
    }

    /// The full configuration `2̂`.
    pub fn all_twos() -> Self {
        Self { lo: 0, heights: vec![2], tail: Tail::AllTwos }
    }

    /// Constant height `h` on `[lo, hi]`, with the given tail outside.
    pub fn constant(lo: i64, hi: i64, h: u8, tail: Tail) -> Result<Self> {
        if hi < lo {
            return Err(SandpileError::Parse(format!("empty window [{lo}, {hi}]")));
        }
        Self::new(lo, vec![h; (hi - lo + 1) as usize], tail)
    }

    /// The configuration `η_A` whose critical set is exactly `A`.
    pub fn from_critical_set(set: &CriticalSet) -> Self {
        match (set.min(), set.max()) {
            (Some(lo), Some(hi)) => {
                let mut heights = vec![1u8; (hi - lo + 1) as usize];
                for &x in set.iter() {
                    heights[(x - lo) as usize] = 2;
                }
                Self { lo, heights, tail: Tail::AllOnes }
            }
            _ => Self::all_ones(),
        }
    }

    /// Critical set of a configuration with an all-ones tail.
    pub fn critical_set(&self) -> Result<CriticalSet> {
        match self.tail {
            Tail::AllOnes => Ok(self.critical_sites_in_window()),
            _ => Err(SandpileError::NotFinite),
        }
    }

    /// Critical sites inside the stored window, regardless of the tail.
    pub fn critical_sites_in_window(&self) -> CriticalSet {
        self.iter().filter(|&(_, h)| h == THRESHOLD).map(|(x, _)| x).collect()
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.heights.len() as i64 - 1
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn heights(&self) -> &[u8] {
        &self.heights
    }

    pub fn window(&self) -> RangeInclusive<i64> {
        self.lo..=self.hi()
    }

    /// `(site, height)` pairs over the stored window.
    pub fn iter(&self) -> impl Iterator<Item = (i64, u8)> + '_ {
        self.heights.iter().enumerate().map(move |(k, &h)| (self.lo + k as i64, h))
    }

    fn in_window(&self, x: i64) -> bool {
        x >= self.lo && x <= self.hi()
    }

    /// Height at `x`, or `None` when `x` falls in an unspecified tail.
    pub fn try_get(&self, x: i64) -> Option<u8> {
        if self.in_window(x) {
            Some(self.heights[(x - self.lo) as usize])
        } else {
            self.tail.height()
        }
    }

    pub fn get(&self, x: i64) -> Result<u8> {
        self.try_get(x).ok_or(SandpileError::InsufficientWindow { site: x, lo: self.lo, hi: self.hi() })
    }

    /// Grows the stored window to contain `[lo, hi]`, filling with the tail.
    pub fn extend_to(&mut self, lo: i64, hi: i64) -> Result<()> {
        let fill = match self.tail.height() {
            Some(h) => h,
            None => {
                if lo < self.lo {
                    return Err(SandpileError::InsufficientWindow { site: lo, lo: self.lo, hi: self.hi() });
                }
                if hi > self.hi() {
                    return Err(SandpileError::InsufficientWindow { site: hi, lo: self.lo, hi: self.hi() });
                }
                return Ok(());
            }
        };
        let len = self.heights.len() as i64;
        if lo < self.lo {
            // amortise repeated growth at the left end
            let grow = (self.lo - lo).max(len / 2);
            let mut fresh = vec![fill; grow as usize];
            fresh.extend_from_slice(&self.heights);
            self.heights = fresh;
            self.lo -= grow;
        }
        let cur_hi = self.hi();
        if hi > cur_hi {
            let grow = (hi - cur_hi).max(len / 2);
            self.heights.extend(std::iter::repeat_n(fill, grow as usize));
        }
        Ok(())
    }

    /// Writes height `h` at `x`, growing the window when the tail allows it.
    pub(crate) fn set(&mut self, x: i64, h: u8) -> Result<()> {
        debug_assert!(h == 1 || h == 2);
        if !self.in_window(x) {
            self.extend_to(x.min(self.lo), x.max(self.hi()))?;
        }
        let lo = self.lo;
        self.heights[(x - lo) as usize] = h;
        Ok(())
    }

    /// Copy of the configuration on `[lo, hi]` with a new tail outside.
    pub fn restrict(&self, lo: i64, hi: i64, tail: Tail) -> Result<Self> {
        if hi < lo {
            return Err(SandpileError::Parse(format!("empty window [{lo}, {hi}]")));
        }
        let heights = (lo..=hi).map(|x| self.get(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self { lo, heights, tail })
    }

    /// `η^n`: equal to `η` on `[-n, n]` and identically one outside.
    pub fn clamp(&self, n: u32) -> Result<Self> {
        let n = n as i64;
        self.restrict(-n, n, Tail::AllOnes)
    }

    /// Same configuration on the smallest window that still carries every
    /// non-tail height (at least one site is always kept).
    pub fn trimmed(&self) -> Self {
        let Some(fill) = self.tail.height() else {
            return self.clone();
        };
        let first = self.heights.iter().position(|&h| h != fill);
        let last = self.heights.iter().rposition(|&h| h != fill);
        match (first, last) {
            (Some(a), Some(b)) => {
                Self { lo: self.lo + a as i64, heights: self.heights[a..=b].to_vec(), tail: self.tail }
            }
            _ => Self { lo: 0, heights: vec![fill], tail: self.tail },
        }
    }

    /// Number of height-1 sites in `[lo, hi]`.
    pub fn count_ones(&self, lo: i64, hi: i64) -> Result<usize> {
        let mut count = 0;
        for x in lo..=hi {
            if self.get(x)? == 1 {
                count += 1;
            }
        }
        Ok(count)
    }

    /// Nearest site `x >= from` with height 1.
    pub(crate) fn scan_right(&self, from: i64) -> Scan {
        let hi = self.hi();
        if from < self.lo {
            match self.tail {
                Tail::AllOnes => return Scan::Found(from),
                Tail::Unspecified => return Scan::Unresolved(from),
                Tail::AllTwos => {}
            }
        }
        if from <= hi {
            for x in from.max(self.lo)..=hi {
                if self.heights[(x - self.lo) as usize] == 1 {
                    return Scan::Found(x);
                }
            }
        }
        let outside = from.max(hi + 1);
        match self.tail {
            Tail::AllOnes => Scan::Found(outside),
            Tail::AllTwos => Scan::Exhausted,
            Tail::Unspecified => Scan::Unresolved(outside),
        }
    }

    /// Nearest site `x <= from` with height 1.
    pub(crate) fn scan_left(&self, from: i64) -> Scan {
        let lo = self.lo;
        let hi = self.hi();
        if from > hi {
            match self.tail {
                Tail::AllOnes => return Scan::Found(from),
                Tail::Unspecified => return Scan::Unresolved(from),
                Tail::AllTwos => {}
            }
        }
        if from >= lo {
            let start = from.min(hi);
            for x in (lo..=start).rev() {
                if self.heights[(x - lo) as usize] == 1 {
                    return Scan::Found(x);
                }
            }
        }
        let outside = from.min(lo - 1);
        match self.tail {
            Tail::AllOnes => Scan::Found(outside),
            Tail::AllTwos => Scan::Exhausted,
            Tail::Unspecified => Scan::Unresolved(outside),
        }
    }

    fn resolved_right(&self, from: i64) -> Result<i64> {
        match self.scan_right(from) {
            Scan::Found(x) => Ok(x),
            Scan::Exhausted => {
                Err(SandpileError::InsufficientWindow { site: self.hi() + 1, lo: self.lo, hi: self.hi() })
            }
            Scan::Unresolved(x) => Err(SandpileError::InsufficientWindow { site: x, lo: self.lo, hi: self.hi() }),
        }
    }

    fn resolved_left(&self, from: i64) -> Result<i64> {
        match self.scan_left(from) {
            Scan::Found(x) => Ok(x),
            Scan::Exhausted => Err(SandpileError::InsufficientWindow { site: self.lo - 1, lo: self.lo, hi: self.hi() }),
            Scan::Unresolved(x) => Err(SandpileError::InsufficientWindow { site: x, lo: self.lo, hi: self.hi() }),
        }
    }

    /// First site where `self` exceeds `upper`, if any.
    ///
    /// Sites are compared on the union of both windows; outside it the
    /// tails are compared when both are known.
    pub fn first_excess_over(&self, upper: &HeightConfig) -> Option<i64> {
        let lo = self.lo.min(upper.lo);
        let hi = self.hi().max(upper.hi());
        for x in lo..=hi {
            if let (Some(a), Some(b)) = (self.try_get(x), upper.try_get(x)) {
                if a > b {
                    return Some(x);
                }
            }
        }
        match (self.tail.height(), upper.tail.height()) {
            (Some(a), Some(b)) if a > b => Some(hi + 1),
            _ => None,
        }
    }

    /// Pointwise order `self ≤ upper`.
    pub fn le(&self, upper: &HeightConfig) -> bool {
        self.first_excess_over(upper).is_none()
    }
}

impl PartialEq for HeightConfig {
    fn eq(&self, other: &Self) -> bool {
        if self.tail != other.tail {
            return false;
        }
        if self.tail == Tail::Unspecified {
            return self.lo == other.lo && self.heights == other.heights;
        }
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        (lo..=hi).all(|x| self.try_get(x) == other.try_get(x))
    }
}

impl Eq for HeightConfig {}

/// Text form: `lo hi tail h(lo) … h(hi)`.
impl fmt::Display for HeightConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lo, self.hi(), self.tail.token())?;
        for h in &self.heights {
            write!(f, " {h}")?;
        }
        Ok(())
    }
}

impl FromStr for HeightConfig {
    type Err = SandpileError;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let mut next = |what: &str| tokens.next().ok_or_else(|| SandpileError::Parse(format!("missing {what}")));
        let lo: i64 = next("lo")?.parse().map_err(|e| SandpileError::Parse(format!("lo: {e}")))?;
        let hi: i64 = next("hi")?.parse().map_err(|e| SandpileError::Parse(format!("hi: {e}")))?;
        let tail = match next("tail")? {
            "ones" => Tail::AllOnes,
            "twos" => Tail::AllTwos,
            "unspec" => Tail::Unspecified,
            other => return Err(SandpileError::Parse(format!("unknown tail `{other}`"))),
        };
        if hi < lo {
            return Err(SandpileError::Parse(format!("empty window [{lo}, {hi}]")));
        }
        let heights = tokens
            .map(|t| t.parse::<u8>().map_err(|e| SandpileError::Parse(format!("height `{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if heights.len() as i64 != hi - lo + 1 {
            return Err(SandpileError::Parse(format!(
                "window [{lo}, {hi}] needs {} heights, found {}",
                hi - lo + 1,
                heights.len()
            )));
        }
        HeightConfig::new(lo, heights, tail)
    }
}

impl Serialize for HeightConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HeightConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite, sorted set of critical sites.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CriticalSet(BTreeSet<i64>);

impl CriticalSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// The interval `[lo, hi]` (empty when `hi < lo`).
    pub fn interval(lo: i64, hi: i64) -> Self {
        (lo..=hi).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: i64) -> bool {
        self.0.contains(&x)
    }

    pub fn min(&self) -> Option<i64> {
        self.0.first().copied()
    }

    pub fn max(&self) -> Option<i64> {
        self.0.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &i64> {
        self.0.iter()
    }

    pub fn insert(&mut self, x: i64) -> bool {
        self.0.insert(x)
    }

    pub fn remove(&mut self, x: i64) -> bool {
        self.0.remove(&x)
    }

    /// Sites of `[min, max]` missing from the set.
    pub fn gaps(&self) -> Vec<i64> {
        match (self.min(), self.max()) {
            (Some(lo), Some(hi)) => (lo..=hi).filter(|x| !self.0.contains(x)).collect(),
            _ => Vec::new(),
        }
    }
}

impl FromIterator<i64> for CriticalSet {
    fn from_iter<I: IntoIterator<Item = i64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Positions `X_j` of the ones and the intervals `I_j = (X_{j-1}, X_j]`
/// for `j` in `j_lo..=j_hi`.
///
/// `X_0` is the first one at or right of the origin, so the origin always
/// lies in `I_0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntervalDecomposition {
    j_lo: i64,
    /// `X_{j_lo - 1}, …, X_{j_hi}`
    ones: Vec<i64>,
}

impl IntervalDecomposition {
    pub fn j_lo(&self) -> i64 {
        self.j_lo
    }

    pub fn j_hi(&self) -> i64 {
        self.j_lo + self.ones.len() as i64 - 2
    }

    /// `X_j` for `j` in `j_lo - 1 ..= j_hi`.
    pub fn one(&self, j: i64) -> i64 {
        let k = j - (self.j_lo - 1);
        assert!(k >= 0 && (k as usize) < self.ones.len(), "X_{j} is outside the decomposition");
        self.ones[k as usize]
    }

    /// `I_j` as an inclusive site range.
    pub fn interval(&self, j: i64) -> RangeInclusive<i64> {
        self.one(j - 1) + 1..=self.one(j)
    }

    pub fn len_of(&self, j: i64) -> u64 {
        (self.one(j) - self.one(j - 1)) as u64
    }

    /// `I_{a} ∪ … ∪ I_{b}` as a site range.
    pub fn span(&self, a: i64, b: i64) -> RangeInclusive<i64> {
        self.one(a - 1) + 1..=self.one(b)
    }

    /// `|I_a| + … + |I_b|`.
    pub fn total_len(&self, a: i64, b: i64) -> u64 {
        (self.one(b) - self.one(a - 1)) as u64
    }

    /// All ones `X_{j_lo-1}, …, X_{j_hi}` in increasing order.
    pub fn ones(&self) -> &[i64] {
        &self.ones
    }
}

/// Interval decomposition of `η` for indices `j_lo..=j_hi`.
pub fn interval_decomposition(eta: &HeightConfig, j_lo: i64, j_hi: i64) -> Result<IntervalDecomposition> {
    if j_hi < j_lo {
        return Err(SandpileError::Parse(format!("empty interval range {j_lo}..={j_hi}")));
    }
    let first = j_lo - 1;
    let mut ones = Vec::with_capacity((j_hi - first + 1) as usize);
    if first <= -1 {
        // walk left from X_{-1} down to X_{first}
        let x_minus1 = eta.resolved_left(-1)?;
        let mut left = vec![x_minus1];
        let mut x = x_minus1;
        for _ in first..-1 {
            x = eta.resolved_left(x - 1)?;
            left.push(x);
        }
        left.reverse();
        let keep = (j_hi.min(-1) - first + 1) as usize;
        ones.extend(left.into_iter().take(keep));
    }
    if j_hi >= 0 {
        let x0 = eta.resolved_right(0)?;
        let mut x = x0;
        if first <= 0 {
            ones.push(x0);
        }
        for j in 1..=j_hi {
            x = eta.resolved_right(x + 1)?;
            if j >= first {
                ones.push(x);
            }
        }
    }
    Ok(IntervalDecomposition { j_lo, ones })
}

/// Finite-window diagnostics for the decency of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecencyReport {
    /// `partial_a[n - 1] = (|I_{-n}| + … + |I_n|) / (2n)` for `n = 1..=n_max`.
    pub partial_a: Vec<f64>,
    /// Maximum of `partial_a` over `n ∈ [⌈n_max/2⌉, n_max]`.
    pub a_estimate: f64,
    /// Density of ones over `I_{-n_max} ∪ … ∪ I_{n_max}`.
    pub rho_estimate: f64,
    /// `1 / (4 e a_estimate)`.
    pub radius: f64,
}

pub fn decency_report(eta: &HeightConfig, n_max: u32) -> Result<DecencyReport> {
    let n_max = n_max.max(1) as i64;
    let dec = interval_decomposition(eta, -n_max, n_max)?;
    let partial_a: Vec<f64> = (1..=n_max).map(|n| dec.total_len(-n, n) as f64 / (2 * n) as f64).collect();
    let from = (n_max + 1) / 2;
    let a_estimate = partial_a[(from.max(1) - 1) as usize..].iter().copied().fold(f64::MIN, f64::max);
    let rho_estimate = (2 * n_max + 1) as f64 / dec.total_len(-n_max, n_max) as f64;
    let radius = 1.0 / (4.0 * std::f64::consts::E * a_estimate);
    Ok(DecencyReport { partial_a, a_estimate, rho_estimate, radius })
}
