//! Exact analysis of the finite-volume process on `[-n, n]`.
//!
//! States are the `2^{2n+1}` height vectors on `[-n, n]`, indexed
//! lexicographically with site `-n` most significant and `1 < 2`, so index
//! 0 is all ones and the last index is all twos. The generator has one
//! unit-rate clock per site; the clock at `i` applies the clamped
//! toppling map `T_{n,i}`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{HeightConfig, Tail};
use crate::error::{Result, SandpileError};
use crate::toppling::{stabilize_pile, FiniteVolumePile, GrainField};

/// Largest volume whose generator is built.
pub const MAX_N: u32 = 6;
/// Largest volume for dense linear solves.
pub const MAX_DENSE_N: u32 = 5;

fn check_cap(n: u32, cap: u32) -> Result<()> {
    if n > cap {
        return Err(SandpileError::SizeLimit { n, cap });
    }
    Ok(())
}

/// Enumeration of `{1, 2}^{[-n, n]}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StateSpace {
    n: u32,
}

impl StateSpace {
    pub fn new(n: u32) -> Result<Self> {
        check_cap(n, MAX_N)?;
        Ok(Self { n })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn width(&self) -> usize {
        2 * self.n as usize + 1
    }

    pub fn len(&self) -> usize {
        1 << self.width()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Heights on `[-n, n]` of state `s`.
    pub fn heights(&self, s: usize) -> Vec<u8> {
        let w = self.width();
        (0..w).map(|k| 1 + ((s >> (w - 1 - k)) & 1) as u8).collect()
    }

    pub fn index_of(&self, heights: &[u8]) -> Result<usize> {
        if heights.len() != self.width() {
            return Err(SandpileError::Parse(format!("expected {} heights, found {}", self.width(), heights.len())));
        }
        heights.iter().try_fold(0usize, |acc, &h| match h {
            1 | 2 => Ok((acc << 1) | (h - 1) as usize),
            other => Err(SandpileError::InvalidHeight(other as u64)),
        })
    }

    pub fn config(&self, s: usize) -> HeightConfig {
        HeightConfig::new(-(self.n as i64), self.heights(s), Tail::AllOnes).expect("heights are 1 or 2")
    }

    pub fn index_of_config(&self, eta: &HeightConfig) -> Result<usize> {
        let n = self.n as i64;
        let heights = (-n..=n).map(|x| eta.get(x)).collect::<Result<Vec<_>>>()?;
        self.index_of(&heights)
    }

    /// Number of sites of height 1 in state `s`.
    pub fn ones(&self, s: usize) -> u32 {
        self.width() as u32 - s.count_ones()
    }

    pub fn is_recurrent(&self, s: usize) -> bool {
        self.ones(s) <= 1
    }

    /// Index of `T_{n,i}(s)`.
    pub fn topple(&self, s: usize, i: i64) -> usize {
        let mut pile = FiniteVolumePile::from_config(self.n, &self.config(s)).expect("volume sites resolve");
        pile.add(i);
        self.index_of_config(&pile.to_config()).expect("volume sites resolve")
    }
}

/// States with at most one site of height 1; there are `2n + 2` of them.
pub fn recurrent_set(n: u32) -> Result<Vec<usize>> {
    let space = StateSpace::new(n)?;
    Ok((0..space.len()).filter(|&s| space.is_recurrent(s)).collect())
}

/// Generator of the finite-volume process, stored by rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateMatrix {
    space: StateSpace,
    /// Off-diagonal `(target, rate)` pairs of each row, sorted by target.
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl RateMatrix {
    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn get(&self, s: usize, s2: usize) -> f64 {
        if s == s2 {
            return self.diag[s];
        }
        self.rows[s].binary_search_by_key(&s2, |&(j, _)| j).map_or(0.0, |k| self.rows[s][k].1)
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    /// `(Q f)(s) = Σ_{s'} q(s, s') f(s')`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|s| self.diag[s] * f[s] + self.rows[s].iter().map(|&(j, q)| q * f[j]).sum::<f64>())
            .collect()
    }

    /// `(p Q)(s') = Σ_s p(s) q(s, s')`.
    pub fn left_apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = p.iter().zip(&self.diag).map(|(a, d)| a * d).collect();
        for (s, row) in self.rows.iter().enumerate() {
            if p[s] != 0.0 {
                for &(j, q) in row {
                    out[j] += p[s] * q;
                }
            }
        }
        out
    }

    /// Dense copy; only for `n <= MAX_DENSE_N`.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        check_cap(self.space.n, MAX_DENSE_N)?;
        let len = self.len();
        let mut m = DMatrix::zeros(len, len);
        for s in 0..len {
            m[(s, s)] = self.diag[s];
            for &(j, q) in &self.rows[s] {
                m[(s, j)] = q;
            }
        }
        Ok(m)
    }

    /// Sparse triplets `row,col,rate` including the diagonal.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,rate\n");
        for s in 0..self.len() {
            let mut entries: Vec<(usize, f64)> = self.rows[s].clone();
            entries.push((s, self.diag[s]));
            entries.sort_by_key(|&(j, _)| j);
            for (j, q) in entries {
                writeln!(out, "{s},{j},{q}").expect("writing to a string");
            }
        }
        out
    }
}

/// `q(s, s') = #{i : T_{n,i}(s) = s'}` off the diagonal, rows summing to zero.
pub fn build_generator(n: u32) -> Result<RateMatrix> {
    let space = StateSpace::new(n)?;
    let nn = n as i64;
    let mut rows = Vec::with_capacity(space.len());
    let mut diag = Vec::with_capacity(space.len());
    for s in 0..space.len() {
        let mut targets: Vec<usize> = (-nn..=nn).map(|i| space.topple(s, i)).collect();
        targets.sort_unstable();
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut stay = 0.0;
        for t in targets {
            if t == s {
                stay += 1.0;
            } else if let Some(last) = row.last_mut().filter(|e| e.0 == t) {
                last.1 += 1.0;
            } else {
                row.push((t, 1.0));
            }
        }
        diag.push(stay - space.width() as f64);
        rows.push(row);
    }
    Ok(RateMatrix { space, rows, diag })
}

/// A probability vector over a [`StateSpace`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub space: StateSpace,
    pub weights: Vec<f64>,
}

impl Distribution {
    pub fn point_mass(space: StateSpace, s: usize) -> Self {
        let mut weights = vec![0.0; space.len()];
        weights[s] = 1.0;
        Self { space, weights }
    }

    /// Uniform law on the recurrent states.
    pub fn uniform_recurrent(n: u32) -> Result<Self> {
        let space = StateSpace::new(n)?;
        let rec = recurrent_set(n)?;
        let mut weights = vec![0.0; space.len()];
        for &s in &rec {
            weights[s] = 1.0 / rec.len() as f64;
        }
        Ok(Self { space, weights })
    }

    /// Empirical law of sampled states.
    pub fn empirical(space: StateSpace, states: &[usize]) -> Self {
        let mut weights = vec![0.0; space.len()];
        for &s in states {
            weights[s] += 1.0;
        }
        let total = states.len().max(1) as f64;
        weights.iter_mut().for_each(|w| *w /= total);
        Self { space, weights }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// CSV rows `state_index,heights,weight`; heights written as digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state_index,heights,weight\n");
        for (s, w) in self.weights.iter().enumerate() {
            let h: String = self.space.heights(s).iter().map(|h| char::from(b'0' + h)).collect();
            writeln!(out, "{s},{h},{w:.16e}").expect("writing to a string");
        }
        out
    }
}

/// Solves `π Q = 0`, `Σ π = 1` by LU with one balance equation replaced
/// by the normalisation.
pub fn stationary_distribution(n: u32) -> Result<Distribution> {
    check_cap(n, MAX_DENSE_N)?;
    let q = build_generator(n)?;
    let mut a = q.to_dense()?.transpose();
    let len = q.len();
    for j in 0..len {
        a[(0, j)] = 1.0;
    }
    let mut b = DVector::zeros(len);
    b[0] = 1.0;
    let pi = a.lu().solve(&b).ok_or_else(|| SandpileError::Numerical("singular balance system".into()))?;
    if pi.iter().any(|x| !x.is_finite()) {
        return Err(SandpileError::Numerical("non-finite stationary weights".into()));
    }
    Ok(Distribution { space: q.space(), weights: pi.iter().copied().collect() })
}

/// `(∫ (Q f) g dμ_n, ∫ f (Q g) dμ_n)` with `μ_n` uniform on the recurrent set.
pub fn check_reversibility(n: u32, f: &[f64], g: &[f64]) -> Result<(f64, f64)> {
    let q = build_generator(n)?;
    if f.len() != q.len() || g.len() != q.len() {
        return Err(SandpileError::Parse(format!("functions need {} values", q.len())));
    }
    let mu = Distribution::uniform_recurrent(n)?;
    let qf = q.apply(f);
    let qg = q.apply(g);
    let lhs = (0..q.len()).map(|s| mu.weights[s] * qf[s] * g[s]).sum();
    let rhs = (0..q.len()).map(|s| mu.weights[s] * f[s] * qg[s]).sum();
    Ok((lhs, rhs))
}

/// Largest `|μ(s) q(s, s') − μ(s') q(s', s)|` over all pairs, with `μ`
/// uniform on the recurrent set.
pub fn detailed_balance_deviation(n: u32) -> Result<f64> {
    let q = build_generator(n)?;
    let mu = Distribution::uniform_recurrent(n)?;
    let mut worst: f64 = 0.0;
    for s in 0..q.len() {
        for &(j, rate) in q.off_diagonal(s) {
            worst = worst.max((mu.weights[s] * rate - mu.weights[j] * q.get(j, s)).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BijectionReport {
    pub n: u32,
    pub pairs_checked: usize,
    /// Ordered recurrent pairs `(s, s')` not reached by exactly one site,
    /// with the number of sites that do reach it.
    pub failures: Vec<(usize, usize, usize)>,
    /// Largest deviation of `μ_n T_{n,i}` from `μ_n` over sites `i`.
    pub pushforward_deviation: f64,
}

impl BijectionReport {
    pub fn holds(&self) -> bool {
        self.failures.is_empty() && self.pushforward_deviation < 1e-12
    }
}

/// For distinct recurrent `η`, `ζ`: exactly one site `i` has `T_{n,i} η = ζ`.
pub fn check_unique_toppling_bijection(n: u32) -> Result<BijectionReport> {
    let space = StateSpace::new(n)?;
    let rec = recurrent_set(n)?;
    let nn = n as i64;
    let images: Vec<Vec<usize>> = rec.iter().map(|&s| (-nn..=nn).map(|i| space.topple(s, i)).collect()).collect();
    let mut failures = Vec::new();
    let mut pairs_checked = 0;
    for (a, &s) in rec.iter().enumerate() {
        for &s2 in &rec {
            if s == s2 {
                continue;
            }
            pairs_checked += 1;
            let hits = images[a].iter().filter(|&&t| t == s2).count();
            if hits != 1 {
                failures.push((s, s2, hits));
            }
        }
    }
    let mu = Distribution::uniform_recurrent(n)?;
    let mut pushforward_deviation: f64 = 0.0;
    for k in 0..space.width() {
        let mut pushed = vec![0.0; space.len()];
        for (a, &s) in rec.iter().enumerate() {
            pushed[images[a][k]] += mu.weights[s];
        }
        let pushed = Distribution { space, weights: pushed };
        pushforward_deviation = pushforward_deviation.max(pushed.max_abs_diff(&mu));
    }
    Ok(BijectionReport { n, pairs_checked, failures, pushforward_deviation })
}

/// Row `s0` of `exp(t Q)` by uniformization, truncated once the Poisson
/// tail is below `1e-12`.
pub fn transient_distribution(n: u32, s0: usize, t: f64) -> Result<Distribution> {
    let q = build_generator(n)?;
    let space = q.space();
    if s0 >= space.len() {
        return Err(SandpileError::InvalidSite { site: s0 as i64, reason: "not a state index".into() });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SandpileError::Numerical(format!("time {t} must be finite and nonnegative")));
    }
    let rate = q.diagonal().iter().fold(0.0_f64, |m, d| m.max(-d));
    let lt = rate * t;
    let mut p = Distribution::point_mass(space, s0).weights;
    if lt == 0.0 {
        return Ok(Distribution { space, weights: p });
    }
    let mut out = vec![0.0; space.len()];
    // log of the Poisson(lt) weight of k jumps
    let mut log_w = -lt;
    let mut k = 0u64;
    loop {
        let w = log_w.exp();
        out.iter_mut().zip(&p).for_each(|(o, x)| *o += w * x);
        // tail after k: P(N > k) ≤ w_{k+1} / (1 − lt / (k + 2)) once k + 2 > lt
        let next_log = log_w + lt.ln() - ((k + 1) as f64).ln();
        if (k + 2) as f64 > 2.0 * lt && next_log.exp() / (1.0 - lt / (k + 2) as f64) < 1e-12 {
            break;
        }
        // p ← p (I + Q / rate)
        let pq = q.left_apply(&p);
        p.iter_mut().zip(&pq).for_each(|(x, y)| *x += y / rate);
        log_w = next_log;
        k += 1;
    }
    Ok(Distribution { space, weights: out })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaExcessReport {
    pub n: u32,
    pub trials: usize,
    /// Grain fields meeting the mass hypothesis whose stabilization was
    /// not recurrent.
    pub violations: Vec<GrainField>,
}

/// Grain field on `[-n, n]` with every entry at least one and at least
/// `12 n` grains on `[-⌊n/2⌋, ⌊n/2⌋]`.
pub fn random_excess_field<R: Rng + ?Sized>(n: u32, rng: &mut R) -> GrainField {
    let nn = n as i64;
    let half = nn / 2;
    let mut counts: Vec<u64> = (-nn..=nn).map(|_| 1 + rng.random_range(0..3)).collect();
    let central = |c: &[u64]| -> u64 { (-half..=half).map(|x| c[(x + nn) as usize]).sum() };
    // either pile the excess on one site or spread it over the centre
    let concentrated = rng.random_bool(0.3);
    let spot = rng.random_range(-half..=half);
    while central(&counts) < 12 * n as u64 {
        let x = if concentrated { spot } else { rng.random_range(-half..=half) };
        counts[(x + nn) as usize] += 1 + rng.random_range(0..4);
    }
    GrainField::new(-nn, counts).expect("nonempty window")
}

/// Stabilizes `trials` random fields with central mass at least `12 n`
/// and records any that do not end up recurrent.
pub fn check_lemma_excess(n: u32, trials: usize, seed: u64) -> Result<LemmaExcessReport> {
    if n < 2 {
        return Err(SandpileError::InvalidSite { site: n as i64, reason: "volume needs n >= 2".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    for _ in 0..trials {
        let field = random_excess_field(n, &mut rng);
        if !stabilize_pile(n, &field)?.is_recurrent() {
            violations.push(field);
        }
    }
    Ok(LemmaExcessReport { n, trials, violations })
}
